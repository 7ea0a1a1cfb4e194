#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hwhelp/catalog.hpp"

namespace hwhelp {

/// Scores closer than this leave the detection ambiguous.
inline constexpr double kAmbiguityMargin = 0.05;

struct ScoredProblem {
  std::string id;
  double score = 0.0;
};

struct DetectionResult {
  std::vector<ScoredProblem> ranked;  // descending score, ties by id
  std::optional<std::string> chosen;
  bool ambiguous = false;
};

struct CodeRegion {
  std::string problem_id;
  std::string text;
  /// 1-based inclusive; {0, 0} for an empty source.
  std::pair<std::size_t, std::size_t> line_span{0, 0};
};

struct SyntaxVerdict {
  bool ok = true;
  std::optional<int> line;
  std::optional<std::string> message;
};

/// Guesses which problem a multi-problem source file is being worked on.
/// A hint that names a catalog problem always wins; an unknown hint throws UnknownProblem.
DetectionResult detect_problem(std::string_view source, const Catalog& catalog,
                               const std::optional<std::string>& hint = std::nullopt);

/// Minimal line span covering every top-level definition of the problem's
/// entry points, plus the import lines directly above that bring in required
/// identifiers. Falls back to the whole file when nothing is defined.
CodeRegion extract_region(std::string_view source, const ProblemManifest& m);

/// Parses `source` with the runner's parse-only command. Throws RunnerUnavailable or Timeout.
SyntaxVerdict syntax_check(std::string_view source, const RunnerSpec& runner,
                           std::chrono::milliseconds timeout = std::chrono::milliseconds{10000});

/// Code lines (no blanks, comments or docstrings) of the top-level
/// definition of `name`, or nullopt when it is not defined.
std::optional<std::vector<std::string>> definition_body(std::string_view source, std::string_view name);

/// Levenshtein distance over line sequences divided by the longer length.
double normalized_line_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace hwhelp
