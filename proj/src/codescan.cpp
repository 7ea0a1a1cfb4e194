#include "hwhelp/codescan.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "hwhelp/error.hpp"
#include "hwhelp/subprocess.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

namespace {

/// [first, last] 0-based line indices of the top-level definition of `name`.
std::optional<std::pair<std::size_t, std::size_t>> definition_span(const std::vector<text::Line>& lines,
                                                                   std::string_view name) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::top_level_def_name(lines[i].body) != name) continue;
    std::size_t last = i;
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (text::is_blank(lines[j].body)) continue;
      if (!text::starts_with_ws(lines[j].body)) break;
      last = j;
    }
    return std::make_pair(i, last);
  }
  return std::nullopt;
}

bool is_import_line(std::string_view line) {
  return line.starts_with("import ") || line.starts_with("from ");
}

bool mentions_identifier(std::string_view line, const std::vector<std::string>& identifiers) {
  for (const auto& id : identifiers) {
    std::regex word("(^|[^A-Za-z0-9_])" + id + "([^A-Za-z0-9_]|$)");
    if (std::regex_search(line.begin(), line.end(), word)) return true;
  }
  return false;
}

std::string slice(std::string_view source, const std::vector<text::Line>& lines, std::size_t first, std::size_t last) {
  std::size_t begin = lines[first].offset;
  std::size_t end = lines[last].offset + lines[last].body.size();
  return std::string(source.substr(begin, end - begin));
}

}  // namespace

std::optional<std::vector<std::string>> definition_body(std::string_view source, std::string_view name) {
  auto lines = text::split_lines(source);
  auto span = definition_span(lines, name);
  if (!span) return std::nullopt;

  std::vector<std::string> body;
  std::string_view open_quote;
  for (std::size_t i = span->first; i <= span->second; ++i) {
    std::string_view t = text::trim(lines[i].body);
    if (!open_quote.empty()) {
      if (t.find(open_quote) != std::string_view::npos) open_quote = {};
      continue;
    }
    if (t.empty() || t.front() == '#') continue;
    for (std::string_view q : {std::string_view("\"\"\""), std::string_view("'''")}) {
      if (t.starts_with(q)) {
        // Docstring; it closes on this line only if the quote appears twice.
        if (t.substr(q.size()).find(q) == std::string_view::npos) open_quote = q;
        t = {};
        break;
      }
    }
    if (t.empty()) continue;
    body.emplace_back(t);
  }
  return body;
}

double normalized_line_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 && m == 0) return 0.0;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

DetectionResult detect_problem(std::string_view source, const Catalog& catalog,
                               const std::optional<std::string>& hint) {
  if (hint && !catalog.contains(*hint)) throw UnknownProblem(*hint);

  DetectionResult result;
  for (const auto& [id, m] : catalog) {
    double presence = 0.0;
    double divergence = 0.0;
    std::size_t defined = 0;
    for (const auto& ep : m.entry_points) {
      auto student = definition_body(source, ep);
      if (!student) continue;
      presence = 1.0;
      auto scaffold = definition_body(m.scaffold, ep).value_or(std::vector<std::string>{});
      divergence += normalized_line_distance(*student, scaffold);
      ++defined;
    }
    if (defined > 0) divergence /= static_cast<double>(defined);
    result.ranked.push_back({id, presence + divergence});
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const ScoredProblem& a, const ScoredProblem& b) { return a.score > b.score; });

  if (hint) {
    result.chosen = *hint;
    return result;
  }
  bool no_signal = result.ranked.empty() || result.ranked.front().score < 1.0;
  bool close_race = result.ranked.size() >= 2 &&
                    result.ranked[0].score - result.ranked[1].score < kAmbiguityMargin;
  result.ambiguous = no_signal || close_race;
  if (!result.ambiguous) result.chosen = result.ranked.front().id;
  return result;
}

CodeRegion extract_region(std::string_view source, const ProblemManifest& m) {
  auto lines = text::split_lines(source);
  CodeRegion region{m.id, {}, {0, 0}};

  std::optional<std::size_t> first, last;
  for (const auto& ep : m.entry_points) {
    auto span = definition_span(lines, ep);
    if (!span) continue;
    std::size_t start = span->first;
    // Walk up over blank lines and imports, keeping imports of required identifiers.
    for (std::size_t k = span->first; k-- > 0;) {
      std::string_view body = lines[k].body;
      if (text::is_blank(body)) continue;
      if (!is_import_line(body)) break;
      if (mentions_identifier(body, m.constraints.required_identifiers)) start = k;
    }
    first = first ? std::min(*first, start) : start;
    last = last ? std::max(*last, span->second) : span->second;
  }

  if (lines.empty()) return region;
  if (!first) {
    first = 0;
    last = lines.size() - 1;
    region.text = std::string(source);
    region.line_span = {1, lines.size()};
    return region;
  }
  region.text = slice(source, lines, *first, *last);
  region.line_span = {*first + 1, *last + 1};
  return region;
}

SyntaxVerdict syntax_check(std::string_view source, const RunnerSpec& runner, std::chrono::milliseconds timeout) {
  TempDir dir;
  auto file = dir.write(runner.file_name, std::string(source));
  ProcessOptions opts;
  opts.working_dir = dir.path();
  opts.timeout = timeout;
  auto result = run_process(expand_command(runner.syntax_check_command, file.string()), opts);
  if (result.timed_out) throw Timeout("syntax check timed out");

  SyntaxVerdict verdict;
  if (result.succeeded()) return verdict;

  verdict.ok = false;
  std::string output = result.err.empty() ? result.out : result.err;
  static const std::regex kLine(R"(line (\d+))");
  static const std::regex kErrorLine(R"(^\s*([A-Za-z_.]*Error\b.*)$)");
  for (const auto& line : text::split_lines(output)) {
    std::string body(line.body);
    std::smatch match;
    if (!verdict.line && std::regex_search(body, match, kLine)) verdict.line = std::stoi(match[1]);
    if (!verdict.message && std::regex_match(body, match, kErrorLine)) verdict.message = match[1];
  }
  if (!verdict.message) {
    auto raw = std::string(text::trim(output));
    verdict.message = raw.empty() ? "syntax check failed with exit code " + std::to_string(result.exit_code) : raw;
  }
  return verdict;
}

}  // namespace hwhelp
