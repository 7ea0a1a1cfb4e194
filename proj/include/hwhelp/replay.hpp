#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hwhelp/catalog.hpp"
#include "hwhelp/gateway.hpp"
#include "hwhelp/guard.hpp"
#include "hwhelp/promptkit.hpp"

namespace hwhelp {

enum class Label { correct, incorrect, incomplete };
enum class Provenance { previous_year, author };

const char* to_string(Label l);
const char* to_string(Provenance p);

struct Checkpoint {
  std::string problem_id;
  std::string code;
  Label label = Label::incorrect;
  Provenance provenance = Provenance::author;

  bool operator==(const Checkpoint&) const = default;
};

/// One JSON object per line; blank lines are skipped. Throws ParseError or UnknownLabel.
std::vector<Checkpoint> parse_checkpoints(std::string_view jsonl, const std::string& origin = "<memory>");
std::vector<Checkpoint> load_checkpoints(const std::filesystem::path& path);
nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j, std::size_t line = 0);

struct ReplayResult {
  std::size_t index = 0;
  std::string problem_id;
  std::string response;
  GuardVerdict guard;
  /// Hash of the prompt that produced `response` (prompt B for solution_first).
  std::string prompt_hash;
  std::string template_id;
  bool failed = false;
  std::string error;
};

struct ReplayOptions {
  CompletionParams params;
  GuardConfig guard;
  std::size_t parallelism = 1;
};

/// Runs every checkpoint through the template; results come back in input
/// order and per-item failures never abort the run.
std::vector<ReplayResult> run_replay(const PromptTemplate& t, std::span<const Checkpoint> checkpoints,
                                     const Catalog& catalog, Backend& backend, const ReplayOptions& options = {});

struct ProblemMetrics {
  std::size_t n = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  std::size_t leak_count = 0;
  std::size_t failed = 0;
};

/// False positive: the assistant endorses code labeled incorrect or incomplete.
/// False negative: the assistant does not endorse code labeled correct.
/// Failed items count toward n and `failed` only.
struct ReplayMetrics {
  std::size_t n = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  std::size_t leak_count = 0;
  std::size_t failed = 0;
  std::map<std::string, ProblemMetrics> by_problem;
};

/// Throws LengthMismatch.
ReplayMetrics score_replay(std::span<const ReplayResult> results, std::span<const Checkpoint> checkpoints);

nlohmann::json result_to_json(const ReplayResult& r);
nlohmann::json metrics_to_json(const ReplayMetrics& m);
void write_results_jsonl(std::ostream& out, std::span<const ReplayResult> results);

/// The code the assistant sees for a submission: the problem's region of the file.
std::string prompt_code(std::string_view source, const ProblemManifest& m);

/// Predicate that runs the autoevaluator; results are memoized per (problem, code).
CodePredicate make_evaluator_predicate(const Catalog& catalog);

}  // namespace hwhelp
