#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hwhelp/catalog.hpp"

namespace hwhelp {

struct GuardConfig {
  /// Shared contiguous token run that counts as leaking the solution.
  std::size_t leak_threshold = 6;
  /// Responses with more sentences than this are flagged.
  std::size_t max_sentences = 4;
  /// Lowercase phrases meaning "the code is correct".
  std::vector<std::string> assertion_phrases{"your solution looks good", "looks correct"};
  /// When set, leaking responses are withheld from the student.
  bool block_on_leak = false;
};

struct GuardVerdict {
  bool leak = false;
  std::size_t max_overlap_tokens = 0;
  bool brevity_violation = false;
  std::size_t sentence_count = 0;
  bool asserts_correct = false;

  bool operator==(const GuardVerdict&) const = default;
};

struct LeakResult {
  bool leak = false;
  std::size_t max_overlap_tokens = 0;
};

struct BrevityResult {
  std::size_t sentence_count = 0;
  bool violation = false;
};

/// Lowercased tokens: identifier/number runs and single punctuation characters.
std::vector<std::string> tokenize_code(std::string_view s);

/// Code lines of a solution note: fenced blocks when present, otherwise every non-blank line.
std::vector<std::string> solution_code_lines(std::string_view note);

/// Longest common contiguous run between two token sequences.
std::size_t longest_common_run(const std::vector<std::string>& a, const std::vector<std::string>& b);

LeakResult detect_leakage(std::string_view response, const ProblemManifest& m, const GuardConfig& config = {});
BrevityResult check_brevity(std::string_view response, const GuardConfig& config = {});
bool classify_assertion(std::string_view response, const GuardConfig& config = {});

GuardVerdict run_guard(std::string_view response, const ProblemManifest& m, const GuardConfig& config = {});

nlohmann::json verdict_to_json(const GuardVerdict& v);
GuardVerdict verdict_from_json(const nlohmann::json& j);

}  // namespace hwhelp
