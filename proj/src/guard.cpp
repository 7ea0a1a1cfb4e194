#include "hwhelp/guard.hpp"

#include <algorithm>
#include <cctype>

#include "hwhelp/text.hpp"

namespace hwhelp {

namespace {
bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_fence(std::string_view line) { return text::trim(line).starts_with("```"); }
}  // namespace

std::vector<std::string> tokenize_code(std::string_view s) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (is_space(c)) {
      ++i;
    } else if (is_word_char(c)) {
      std::size_t start = i;
      while (i < s.size() && is_word_char(s[i])) ++i;
      tokens.push_back(text::to_lower(s.substr(start, i - start)));
    } else if (static_cast<unsigned char>(c) >= 0x80) {
      // Multi-byte UTF-8 sequence (prose punctuation such as dashes): one token.
      std::size_t start = i++;
      while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
      tokens.emplace_back(s.substr(start, i - start));
    } else {
      tokens.emplace_back(1, c);
      ++i;
    }
  }
  return tokens;
}

std::vector<std::string> solution_code_lines(std::string_view note) {
  auto lines = text::split_lines(note);
  std::vector<std::string> fenced, all;
  bool inside = false, any_fence = false;
  for (const auto& l : lines) {
    if (is_fence(l.body)) {
      inside = !inside;
      any_fence = true;
      continue;
    }
    if (text::is_blank(l.body)) continue;
    all.emplace_back(l.body);
    if (inside) fenced.emplace_back(l.body);
  }
  return any_fence ? fenced : all;
}

std::size_t longest_common_run(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

LeakResult detect_leakage(std::string_view response, const ProblemManifest& m, const GuardConfig& config) {
  if (!m.solution_note || text::trim(*m.solution_note).empty()) return {};
  std::vector<std::string> solution;
  for (const auto& line : solution_code_lines(*m.solution_note)) {
    auto toks = tokenize_code(line);
    solution.insert(solution.end(), toks.begin(), toks.end());
  }
  LeakResult r;
  r.max_overlap_tokens = longest_common_run(tokenize_code(response), solution);
  r.leak = r.max_overlap_tokens >= config.leak_threshold;
  return r;
}

BrevityResult check_brevity(std::string_view response, const GuardConfig& config) {
  // Fenced code does not count toward sentences.
  std::string prose;
  bool inside = false;
  for (const auto& l : text::split_lines(response)) {
    if (is_fence(l.body)) {
      inside = !inside;
      prose += ' ';
      continue;
    }
    if (!inside) {
      prose += l.body;
      prose += ' ';
    }
  }

  BrevityResult r;
  bool segment_has_text = false;
  for (std::size_t i = 0; i < prose.size(); ++i) {
    char c = prose[i];
    bool terminator = c == '.' || c == '?' || c == '!';
    bool at_boundary = i + 1 == prose.size() || is_space(prose[i + 1]);
    if (terminator && at_boundary) {
      if (segment_has_text) ++r.sentence_count;
      segment_has_text = false;
    } else if (!is_space(c) && !terminator) {
      segment_has_text = true;
    }
  }
  if (segment_has_text) ++r.sentence_count;  // unterminated trailing sentence
  r.violation = r.sentence_count > config.max_sentences;
  return r;
}

bool classify_assertion(std::string_view response, const GuardConfig& config) {
  std::string lowered = text::to_lower(text::trim(response));
  return std::any_of(config.assertion_phrases.begin(), config.assertion_phrases.end(),
                     [&](const std::string& p) { return lowered.find(p) != std::string::npos; });
}

GuardVerdict run_guard(std::string_view response, const ProblemManifest& m, const GuardConfig& config) {
  GuardVerdict v;
  auto leak = detect_leakage(response, m, config);
  v.leak = leak.leak;
  v.max_overlap_tokens = leak.max_overlap_tokens;
  auto brevity = check_brevity(response, config);
  v.sentence_count = brevity.sentence_count;
  v.brevity_violation = brevity.violation;
  v.asserts_correct = classify_assertion(response, config);
  return v;
}

nlohmann::json verdict_to_json(const GuardVerdict& v) {
  return {{"leak", v.leak},
          {"max_overlap_tokens", v.max_overlap_tokens},
          {"brevity_violation", v.brevity_violation},
          {"sentence_count", v.sentence_count},
          {"asserts_correct", v.asserts_correct}};
}

GuardVerdict verdict_from_json(const nlohmann::json& j) {
  GuardVerdict v;
  v.leak = j.value("leak", false);
  v.max_overlap_tokens = j.value("max_overlap_tokens", std::size_t{0});
  v.brevity_violation = j.value("brevity_violation", false);
  v.sentence_count = j.value("sentence_count", std::size_t{0});
  v.asserts_correct = j.value("asserts_correct", false);
  return v;
}

}  // namespace hwhelp
