#include "hwhelp/promptkit.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "hwhelp/error.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

const char* to_string(Strategy s) { return s == Strategy::single_shot ? "single_shot" : "solution_first"; }

Strategy strategy_from_string(std::string_view s) {
  if (s == "single_shot") return Strategy::single_shot;
  if (s == "solution_first") return Strategy::solution_first;
  throw Error("unknown strategy: " + std::string(s));
}

const char* to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

namespace {

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "assistant") return Role::assistant;
  if (s == "user") return Role::user;
  throw Error("unknown role: " + std::string(s));
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string without_trailing_newlines(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

void validate_template(const PromptTemplate& t) {
  static const std::regex kId("[A-Za-z0-9][A-Za-z0-9_.-]*");
  if (!std::regex_match(t.id, kId) || t.id.find("..") != std::string::npos) {
    throw InvalidTemplate("invalid template id '" + t.id + "'");
  }
  std::size_t n = count_occurrences(t.preamble, kSolutionMarker);
  if (n != 1) {
    throw InvalidTemplate("template '" + t.id + "' must contain %SOLUTION% exactly once (found " +
                          std::to_string(n) + ")");
  }
}

PromptTemplate load_template(const std::filesystem::path& dir, std::string_view id) {
  PromptTemplate t{std::string(id), {}, Strategy::single_shot};
  auto path = dir / (t.id + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPath(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  t.preamble = ss.str();
  validate_template(t);
  return t;
}

void save_template(const std::filesystem::path& dir, const PromptTemplate& t) {
  validate_template(t);
  std::filesystem::create_directories(dir);
  auto path = dir / (t.id + ".txt");
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << t.preamble;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> list_templates(const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  if (!std::filesystem::is_directory(dir)) return ids;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<Exchange> truncate_history(std::span<const Exchange> history) {
  std::vector<Exchange> sorted(history.begin(), history.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Exchange& a, const Exchange& b) { return a.seq < b.seq; });
  if (sorted.size() > kMaxHistory) sorted.erase(sorted.begin(), sorted.end() - kMaxHistory);
  return sorted;
}

std::string substitute_solution(std::string_view preamble, std::string_view note) {
  std::size_t pos = preamble.find(kSolutionMarker);
  if (pos == std::string_view::npos) return std::string(preamble);
  std::string_view before = preamble.substr(0, pos);
  std::string_view after = preamble.substr(pos + kSolutionMarker.size());

  std::string trimmed_note = without_trailing_newlines(note);
  if (!trimmed_note.empty()) return std::string(before) + trimmed_note + std::string(after);

  std::size_t line_start = before.rfind('\n');
  line_start = line_start == std::string_view::npos ? 0 : line_start + 1;
  std::size_t rest = after.find('\n');
  bool whole_line = text::trim(before.substr(line_start)).empty() &&
                    text::trim(after.substr(0, rest == std::string_view::npos ? after.size() : rest)).empty();
  if (!whole_line) return std::string(before) + std::string(after);

  std::string head(preamble.substr(0, line_start));
  std::string_view tail = rest == std::string_view::npos ? std::string_view{} : after.substr(rest + 1);
  // Collapse the blank line that separated the marker from its neighbours.
  if ((head.empty() || head.ends_with("\n\n")) && tail.starts_with("\n")) tail.remove_prefix(1);
  return head + std::string(tail);
}

std::string fence_code(std::string_view code) {
  std::string fence = "```";
  while (code.find(fence) != std::string_view::npos) fence += '`';
  return fence + "\n" + without_trailing_newlines(code) + "\n" + fence;
}

std::optional<std::string> first_fenced_block(std::string_view content) {
  auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view open = text::trim(lines[i].body);
    if (!open.starts_with("```")) continue;
    std::size_t ticks = open.find_first_not_of('`');
    ticks = ticks == std::string_view::npos ? open.size() : ticks;
    std::string fence(ticks, '`');
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (text::trim(lines[j].body) == fence) {
        if (j == i + 1) return std::string();
        std::size_t begin = lines[i + 1].offset;
        std::size_t end = lines[j - 1].offset + lines[j - 1].body.size();
        return std::string(content.substr(begin, end - begin));
      }
    }
    return std::nullopt;
  }
  return std::nullopt;
}

std::string hash_messages(const std::vector<Message>& messages) {
  std::string canonical;
  for (const auto& m : messages) {
    canonical += to_string(m.role);
    canonical += '\n';
    canonical += std::to_string(m.content.size());
    canonical += '\n';
    canonical += m.content;
    canonical += '\n';
  }
  return text::sha256_hex(canonical);
}

void finalize(AssembledPrompt& p) {
  std::size_t chars = 0;
  for (const auto& m : p.messages) chars += m.content.size();
  p.token_estimate = (chars + 3) / 4;
  p.prompt_hash = hash_messages(p.messages);
}

AssembledPrompt assemble_prompt(const PromptTemplate& t, const ProblemManifest& m, std::string_view code,
                                std::span<const Exchange> history, const EvalReport* report) {
  if (text::trim(code).empty()) throw EmptyCode();
  if (history.size() > kMaxHistory) throw HistoryTooLong(history.size());

  AssembledPrompt p;
  p.template_id = t.id;
  p.problem_id = m.id;
  p.messages.push_back({Role::system, without_trailing_newlines(substitute_solution(t.preamble, solution_note_text(m)))});
  p.messages.push_back({Role::user, m.statement});

  std::vector<Exchange> ordered(history.begin(), history.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const Exchange& a, const Exchange& b) { return a.seq < b.seq; });
  for (const auto& ex : ordered) {
    p.messages.push_back({Role::user, fence_code(ex.code_snapshot)});
    p.messages.push_back({Role::assistant, ex.assistant_response});
  }

  std::string last = fence_code(code);
  if (report && !report->all_passed) {
    last += "\n\n";
    last += kReportHeading;
    last += "\n";
    last += without_trailing_newlines(format_report(*report));
  }
  p.messages.push_back({Role::user, std::move(last)});
  finalize(p);
  return p;
}

std::vector<AssembledPrompt> render_strategy(const PromptTemplate& t, const ProblemManifest& m,
                                             std::string_view code, std::span<const Exchange> history,
                                             const EvalReport* report, CallContext context) {
  if (t.strategy == Strategy::single_shot) return {assemble_prompt(t, m, code, history, report)};
  if (context == CallContext::live) throw StrategyNotAllowedLive();

  AssembledPrompt a;
  a.template_id = t.id + "#solution";
  a.problem_id = m.id;
  a.messages.push_back({Role::system, std::string(kSolutionFirstInstruction)});
  a.messages.push_back({Role::user, m.statement});
  finalize(a);

  AssembledPrompt b = assemble_prompt(t, m, code, history, report);
  b.messages.front().content += "\n\n";
  b.messages.front().content += kReferenceHeading;
  finalize(b);
  return {std::move(a), std::move(b)};
}

AssembledPrompt attach_reference_solution(AssembledPrompt b, std::string_view solution) {
  auto& system = b.messages.front().content;
  system += "\n";
  system += without_trailing_newlines(solution);
  finalize(b);
  return b;
}

std::string render_prompt_text(const AssembledPrompt& p) {
  std::string out = "template: " + p.template_id + "\n";
  out += "problem: " + p.problem_id + "\n";
  out += "hash: " + p.prompt_hash + "\n";
  out += "tokens: " + std::to_string(p.token_estimate) + "\n";
  for (const auto& m : p.messages) {
    out += "=== ";
    out += to_string(m.role);
    out += " ===\n";
    out += m.content;
    out += "\n";
  }
  return out;
}

nlohmann::json prompt_to_json(const AssembledPrompt& p) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : p.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"messages", messages},
          {"token_estimate", p.token_estimate},
          {"template_id", p.template_id},
          {"prompt_hash", p.prompt_hash},
          {"problem_id", p.problem_id}};
}

AssembledPrompt prompt_from_json(const nlohmann::json& j) {
  AssembledPrompt p;
  for (const auto& m : j.at("messages")) {
    p.messages.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  p.template_id = j.value("template_id", "");
  p.problem_id = j.value("problem_id", "");
  finalize(p);
  return p;
}

nlohmann::json exchange_to_json(const Exchange& e) {
  return {{"code_snapshot", e.code_snapshot},
          {"assistant_response", e.assistant_response},
          {"at_ms", std::chrono::duration_cast<std::chrono::milliseconds>(e.at.time_since_epoch()).count()},
          {"seq", e.seq}};
}

Exchange exchange_from_json(const nlohmann::json& j) {
  Exchange e;
  e.code_snapshot = j.at("code_snapshot").get<std::string>();
  e.assistant_response = j.at("assistant_response").get<std::string>();
  e.at = std::chrono::system_clock::time_point(std::chrono::milliseconds(j.value("at_ms", std::int64_t{0})));
  e.seq = j.at("seq").get<std::int64_t>();
  return e;
}

}  // namespace hwhelp
