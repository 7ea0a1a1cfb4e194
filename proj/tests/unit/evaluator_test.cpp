#include <gtest/gtest.h>

#include "hwhelp/evaluator.hpp"
#include "support.hpp"

using namespace hwhelp;
using testing_support::course;
using testing_support::slurp;

TEST(Evaluator, CorrectSolutionPassesEveryDoctest) {
  const auto m = course().at("add_abs_value");
  auto r = run_tests(testing_support::correct_add_abs(), m);
  EXPECT_TRUE(r.syntax_ok);
  EXPECT_TRUE(r.all_passed);
  EXPECT_FALSE(gate_help(r));
  ASSERT_EQ(r.outcomes.size(), 4u);
  for (const auto& o : r.outcomes) EXPECT_EQ(o.status, TestStatus::pass);
}

TEST(Evaluator, SwappedBranchesMatchOracle) {
  const auto m = course().at("add_abs_value");
  const std::vector<std::pair<int, int>> args = {{2, 3}, {2, -3}, {-1, 4}, {-1, -4}};
  auto r = run_tests(testing_support::swapped_add_abs(), m);
  EXPECT_TRUE(r.syntax_ok);
  EXPECT_FALSE(r.all_passed);
  EXPECT_TRUE(gate_help(r));
  ASSERT_EQ(r.outcomes.size(), args.size());
  for (std::size_t i = 0; i < args.size(); ++i) {
    auto [a, b] = args[i];
    EXPECT_EQ(r.outcomes[i].status, TestStatus::fail);
    EXPECT_EQ(r.outcomes[i].actual, std::to_string(testing_support::oracle_add_abs(a, b, true)));
    EXPECT_EQ(r.outcomes[i].expected, std::to_string(testing_support::oracle_add_abs(a, b, false)));
  }
}

TEST(Evaluator, SyntaxErrorRunsNoTests) {
  const auto m = course().at("add_abs_value");
  auto before = executed_test_count();
  auto r = run_tests(slurp(testing_support::fixture("submissions/add_abs_broken.py")), m);
  EXPECT_FALSE(r.syntax_ok);
  EXPECT_FALSE(r.all_passed);
  EXPECT_TRUE(r.outcomes.empty());
  EXPECT_EQ(r.syntax_line, 13);
  EXPECT_EQ(executed_test_count(), before);
  EXPECT_EQ(format_report(r), "syntax error\nline 13: SyntaxError: expected ':'\n");
}

TEST(Evaluator, CounterCountsEachTest) {
  const auto m = course().at("largest_factor");
  auto before = executed_test_count();
  run_tests("def largest_factor(n):\n    return 1\n", m);
  EXPECT_EQ(executed_test_count() - before, m.tests.size());
}

TEST(Evaluator, RuntimeErrorIsReported) {
  const auto m = course().at("largest_factor");
  auto r = run_tests("def largest_factor(n):\n    return 1 // 0\n", m);
  ASSERT_FALSE(r.outcomes.empty());
  EXPECT_EQ(r.outcomes[0].status, TestStatus::error);
  EXPECT_EQ(r.outcomes[0].actual, "ZeroDivisionError: integer division or modulo by zero");
}

TEST(Evaluator, TimeoutPerTest) {
  ProblemManifest m = course().at("largest_factor");
  for (auto& t : m.tests) t.timeout_ms = 300;
  auto started = std::chrono::steady_clock::now();
  auto r = run_tests("def largest_factor(n):\n    while True:\n        pass\n", m);
  auto elapsed = std::chrono::steady_clock::now() - started;
  ASSERT_EQ(r.outcomes.size(), m.tests.size());
  for (const auto& o : r.outcomes) {
    EXPECT_EQ(o.status, TestStatus::timeout);
    EXPECT_EQ(o.actual, "timed out after 300 ms");
  }
  EXPECT_LT(elapsed, std::chrono::seconds(5));
}

TEST(Evaluator, OutputLimit) {
  const auto m = course().at("largest_factor");
  auto r = run_tests("print('x' * 200000)\ndef largest_factor(n):\n    return 1\n", m);
  ASSERT_FALSE(r.outcomes.empty());
  EXPECT_EQ(r.outcomes[0].status, TestStatus::error);
  EXPECT_EQ(r.outcomes[0].actual, "output limit exceeded");
}

TEST(Evaluator, TrailingWhitespaceIsIgnored) {
  const auto m = course().at("largest_factor");
  auto r = run_tests(
      "def largest_factor(n):\n"
      "    return max(k for k in range(1, n) if n % k == 0)\n"
      "import atexit\n"
      "atexit.register(lambda: print('   '))\n",
      m);
  EXPECT_TRUE(r.all_passed) << format_report(r);
}

TEST(Evaluator, ReportJsonRoundTrip) {
  const auto m = course().at("add_abs_value");
  auto r = run_tests(testing_support::swapped_add_abs(), m);
  auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(back.outcomes, r.outcomes);
  EXPECT_EQ(back.all_passed, r.all_passed);
  EXPECT_EQ(back.problem_id, r.problem_id);
  EXPECT_EQ(format_report(back), format_report(r));
}

TEST(Evaluator, ReportFromJsonRecomputesAllPassed) {
  nlohmann::json j = {{"problem_id", "add_abs_value"},
                      {"syntax_ok", true},
                      {"all_passed", true},
                      {"outcomes", {{{"test_index", 0}, {"status", "fail"}, {"actual", "1"}, {"expected", "2"}}}}};
  EXPECT_FALSE(report_from_json(j).all_passed);
}

TEST(Evaluator, FormatReportIsStable) {
  EvalReport r;
  r.problem_id = "p";
  r.outcomes = {{0, TestStatus::pass, "f(1)", "1", "1"}, {1, TestStatus::fail, "f(2)", "3\n4", "2"}};
  EXPECT_EQ(format_report(r),
            "1/2 tests passed\n"
            "\n--- test 2 (fail) ---\n"
            "call:     f(2)\n"
            "expected: 2\n"
            "actual:   3\n"
            "          4\n");
}
