#include "hwhelp/replay.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "hwhelp/codescan.hpp"
#include "hwhelp/error.hpp"
#include "hwhelp/evaluator.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

using nlohmann::json;

const char* to_string(Label l) {
  switch (l) {
    case Label::correct: return "correct";
    case Label::incorrect: return "incorrect";
    case Label::incomplete: return "incomplete";
  }
  return "incorrect";
}

const char* to_string(Provenance p) { return p == Provenance::previous_year ? "previous_year" : "author"; }

Checkpoint checkpoint_from_json(const json& j, std::size_t line) {
  Checkpoint c;
  c.problem_id = j.at("problem_id").get<std::string>();
  c.code = j.at("code").get<std::string>();
  std::string label = j.at("label").get<std::string>();
  if (label == "correct") {
    c.label = Label::correct;
  } else if (label == "incorrect") {
    c.label = Label::incorrect;
  } else if (label == "incomplete") {
    c.label = Label::incomplete;
  } else {
    throw UnknownLabel(line, label);
  }
  std::string prov = j.value("provenance", "author");
  if (prov == "previous_year") {
    c.provenance = Provenance::previous_year;
  } else if (prov == "author") {
    c.provenance = Provenance::author;
  } else {
    throw ParseError("<checkpoint>", line, "unknown provenance '" + prov + "'");
  }
  return c;
}

json checkpoint_to_json(const Checkpoint& c) {
  return {{"problem_id", c.problem_id},
          {"code", c.code},
          {"label", to_string(c.label)},
          {"provenance", to_string(c.provenance)}};
}

std::vector<Checkpoint> parse_checkpoints(std::string_view jsonl, const std::string& origin) {
  std::vector<Checkpoint> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::is_blank(line.body)) continue;
    json j;
    try {
      j = json::parse(line.body);
    } catch (const json::parse_error& e) {
      throw ParseError(origin, line_no, e.what());
    }
    try {
      out.push_back(checkpoint_from_json(j, line_no));
    } catch (const json::exception& e) {
      throw ParseError(origin, line_no, e.what());
    }
  }
  return out;
}

std::vector<Checkpoint> load_checkpoints(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPath(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoints(ss.str(), path.string());
}

std::string prompt_code(std::string_view source, const ProblemManifest& m) { return extract_region(source, m).text; }

namespace {

ReplayResult replay_one(const PromptTemplate& t, const Checkpoint& cp, std::size_t index, const Catalog& catalog,
                        Backend& backend, const ReplayOptions& options) {
  ReplayResult r;
  r.index = index;
  r.problem_id = cp.problem_id;
  r.template_id = t.id;
  try {
    const ProblemManifest& m = catalog.at(cp.problem_id);
    auto prompts = render_strategy(t, m, prompt_code(cp.code, m), {}, nullptr, CallContext::replay);
    AssembledPrompt final_prompt = prompts.front();
    if (prompts.size() == 2) {
      auto reference = complete(backend, prompts[0], options.params);
      if (!reference.ok()) throw Error("reference solution failed: " + reference.terminal.message);
      final_prompt = attach_reference_solution(prompts[1], reference.text);
    }
    r.prompt_hash = final_prompt.prompt_hash;
    auto completion = complete(backend, final_prompt, options.params);
    if (!completion.ok()) {
      throw Error(std::string("backend error (") + to_string(completion.terminal.error) +
                  "): " + completion.terminal.message);
    }
    r.response = completion.text;
    r.guard = run_guard(r.response, m, options.guard);
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
    r.response = std::string("error: ") + e.what();
    r.guard = {};
  }
  return r;
}

}  // namespace

std::vector<ReplayResult> run_replay(const PromptTemplate& t, std::span<const Checkpoint> checkpoints,
                                     const Catalog& catalog, Backend& backend, const ReplayOptions& options) {
  std::vector<ReplayResult> results(checkpoints.size());
  std::size_t workers = std::min(std::max<std::size_t>(options.parallelism, 1), checkpoints.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      results[i] = replay_one(t, checkpoints[i], i, catalog, backend, options);
    }
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < checkpoints.size(); i = next++) {
        results[i] = replay_one(t, checkpoints[i], i, catalog, backend, options);
      }
    });
  }
  pool.clear();
  return results;
}

ReplayMetrics score_replay(std::span<const ReplayResult> results, std::span<const Checkpoint> checkpoints) {
  if (results.size() != checkpoints.size()) throw LengthMismatch(results.size(), checkpoints.size());
  ReplayMetrics metrics;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto& cp = checkpoints[i];
    auto& per = metrics.by_problem[cp.problem_id];
    ++metrics.n;
    ++per.n;
    if (r.failed) {
      ++metrics.failed;
      ++per.failed;
      continue;
    }
    bool endorsed = r.guard.asserts_correct;
    if (cp.label != Label::correct && endorsed) {
      ++metrics.false_positive;
      ++per.false_positive;
    }
    if (cp.label == Label::correct && !endorsed) {
      ++metrics.false_negative;
      ++per.false_negative;
    }
    if (r.guard.leak) {
      ++metrics.leak_count;
      ++per.leak_count;
    }
  }
  return metrics;
}

json result_to_json(const ReplayResult& r) {
  json j = {{"index", r.index},
            {"problem_id", r.problem_id},
            {"template_id", r.template_id},
            {"prompt_hash", r.prompt_hash},
            {"response", r.response},
            {"guard", verdict_to_json(r.guard)},
            {"failed", r.failed}};
  if (r.failed) j["error"] = r.error;
  return j;
}

json metrics_to_json(const ReplayMetrics& m) {
  json by = json::object();
  for (const auto& [id, p] : m.by_problem) {
    by[id] = {{"n", p.n},
              {"false_positive", p.false_positive},
              {"false_negative", p.false_negative},
              {"leak_count", p.leak_count},
              {"failed", p.failed}};
  }
  return {{"n", m.n},
          {"false_positive", m.false_positive},
          {"false_negative", m.false_negative},
          {"leak_count", m.leak_count},
          {"failed", m.failed},
          {"by_problem", by}};
}

void write_results_jsonl(std::ostream& out, std::span<const ReplayResult> results) {
  for (const auto& r : results) out << result_to_json(r).dump() << '\n';
}

CodePredicate make_evaluator_predicate(const Catalog& catalog) {
  struct State {
    Catalog catalog;
    std::mutex mutex;
    std::map<std::string, bool> memo;
  };
  auto state = std::make_shared<State>();
  state->catalog = catalog;
  return [state](std::string_view problem_id, std::string_view code) {
    const ProblemManifest* m = state->catalog.find(problem_id);
    if (!m) return false;
    std::string key = std::string(problem_id) + '\0' + std::string(code);
    {
      std::lock_guard lock(state->mutex);
      if (auto it = state->memo.find(key); it != state->memo.end()) return it->second;
    }
    bool passed = false;
    try {
      passed = run_tests(std::string(code), *m).all_passed;
    } catch (const Error&) {
      passed = false;
    }
    std::lock_guard lock(state->mutex);
    state->memo[key] = passed;
    return passed;
  };
}

}  // namespace hwhelp
