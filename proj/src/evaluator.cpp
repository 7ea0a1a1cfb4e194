#include "hwhelp/evaluator.hpp"

#include <algorithm>
#include <atomic>

#include "hwhelp/codescan.hpp"
#include "hwhelp/error.hpp"
#include "hwhelp/subprocess.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

namespace {

std::atomic<std::uint64_t> g_executed_tests{0};

std::string last_nonblank_line(std::string_view s) {
  auto lines = text::split_lines(s);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!text::is_blank(it->body)) return std::string(text::trim(it->body));
  }
  return {};
}

TestOutcome run_one(const std::string& source, const ProblemManifest& m, std::size_t index) {
  const TestCase& tc = m.tests[index];
  TestOutcome outcome{index, TestStatus::error, tc.call, {}, tc.expected};

  TempDir dir;
  std::string program = source;
  if (!program.empty() && program.back() != '\n') program += '\n';
  program += text::replace_all(m.runner.print_template, "{call}", tc.call);
  program += '\n';
  auto file = dir.write(m.runner.file_name, program);

  ProcessOptions opts;
  opts.working_dir = dir.path();
  opts.timeout = std::chrono::milliseconds(tc.timeout_ms);
  opts.stdout_limit = kTestOutputLimit;
  ++g_executed_tests;
  auto result = run_process(expand_command(m.runner.command, file.string()), opts);

  if (result.timed_out) {
    outcome.status = TestStatus::timeout;
    outcome.actual = "timed out after " + std::to_string(tc.timeout_ms) + " ms";
  } else if (result.stdout_overflow) {
    outcome.status = TestStatus::error;
    outcome.actual = "output limit exceeded";
  } else if (!result.succeeded()) {
    outcome.status = TestStatus::error;
    std::string msg = last_nonblank_line(result.err);
    if (msg.empty()) {
      msg = result.term_signal ? "killed by signal " + std::to_string(result.term_signal)
                               : "exit code " + std::to_string(result.exit_code);
    }
    outcome.actual = msg;
  } else {
    outcome.actual = text::normalize_output(result.out);
    outcome.status = outcome.actual == text::normalize_output(tc.expected) ? TestStatus::pass : TestStatus::fail;
  }
  return outcome;
}

void indent_block(std::string& out, std::string_view label, std::string_view value) {
  out += label;
  auto lines = text::split_lines(value);
  if (lines.empty()) {
    out += "\n";
    return;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += std::string(label.size(), ' ');
    out += lines[i].body;
    out += '\n';
  }
}

}  // namespace

const char* to_string(TestStatus s) {
  switch (s) {
    case TestStatus::pass: return "pass";
    case TestStatus::fail: return "fail";
    case TestStatus::error: return "error";
    case TestStatus::timeout: return "timeout";
  }
  return "error";
}

TestStatus test_status_from_string(std::string_view s) {
  if (s == "pass") return TestStatus::pass;
  if (s == "fail") return TestStatus::fail;
  if (s == "timeout") return TestStatus::timeout;
  if (s == "error") return TestStatus::error;
  throw Error("unknown test status: " + std::string(s));
}

std::uint64_t executed_test_count() { return g_executed_tests.load(); }

EvalReport run_tests(const std::string& source, const ProblemManifest& m) {
  const auto started = std::chrono::steady_clock::now();
  EvalReport report;
  report.problem_id = m.id;

  auto verdict = syntax_check(source, m.runner);
  report.syntax_ok = verdict.ok;
  if (!verdict.ok) {
    report.syntax_line = verdict.line;
    report.syntax_message = verdict.message;
  } else {
    for (std::size_t i = 0; i < m.tests.size(); ++i) report.outcomes.push_back(run_one(source, m, i));
  }
  report.all_passed = report.syntax_ok && !report.outcomes.empty() &&
                      std::all_of(report.outcomes.begin(), report.outcomes.end(),
                                  [](const TestOutcome& o) { return o.status == TestStatus::pass; });
  report.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                           .count();
  return report;
}

std::string format_report(const EvalReport& report) {
  std::string out;
  if (!report.syntax_ok) {
    out += "syntax error\n";
    std::string msg = report.syntax_message.value_or("");
    if (report.syntax_line) msg = "line " + std::to_string(*report.syntax_line) + ": " + msg;
    if (!msg.empty()) out += msg + "\n";
    return out;
  }
  std::size_t passed = std::count_if(report.outcomes.begin(), report.outcomes.end(),
                                     [](const TestOutcome& o) { return o.status == TestStatus::pass; });
  out += std::to_string(passed) + "/" + std::to_string(report.outcomes.size()) + " tests passed\n";
  for (const auto& o : report.outcomes) {
    if (o.status == TestStatus::pass) continue;
    out += "\n--- test " + std::to_string(o.test_index + 1) + " (" + to_string(o.status) + ") ---\n";
    indent_block(out, "call:     ", o.call);
    indent_block(out, "expected: ", o.expected);
    indent_block(out, "actual:   ", o.actual);
  }
  return out;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json outcomes = nlohmann::json::array();
  for (const auto& o : r.outcomes) {
    outcomes.push_back({{"test_index", o.test_index},
                        {"status", to_string(o.status)},
                        {"call", o.call},
                        {"actual", o.actual},
                        {"expected", o.expected}});
  }
  nlohmann::json j = {{"problem_id", r.problem_id},
                      {"outcomes", outcomes},
                      {"syntax_ok", r.syntax_ok},
                      {"all_passed", r.all_passed},
                      {"duration_ms", r.duration_ms}};
  if (r.syntax_line) j["syntax_line"] = *r.syntax_line;
  if (r.syntax_message) j["syntax_message"] = *r.syntax_message;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.problem_id = j.value("problem_id", "");
  r.syntax_ok = j.value("syntax_ok", true);
  r.duration_ms = j.value("duration_ms", std::int64_t{0});
  if (j.contains("outcomes")) {
    for (const auto& o : j.at("outcomes")) {
      r.outcomes.push_back({o.value("test_index", std::size_t{0}),
                            test_status_from_string(o.value("status", "error")),
                            o.value("call", ""), o.value("actual", ""), o.value("expected", "")});
    }
  }
  if (j.contains("syntax_line")) r.syntax_line = j.at("syntax_line").get<int>();
  if (j.contains("syntax_message")) r.syntax_message = j.at("syntax_message").get<std::string>();
  r.all_passed = r.syntax_ok && !r.outcomes.empty() &&
                 std::all_of(r.outcomes.begin(), r.outcomes.end(),
                             [](const TestOutcome& o) { return o.status == TestStatus::pass; });
  return r;
}

}  // namespace hwhelp
