#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hwhelp/catalog.hpp"
#include "hwhelp/evaluator.hpp"

namespace hwhelp {

inline constexpr std::string_view kDefaultTemplateId = "fig4-v1";
inline constexpr std::string_view kSolutionMarker = "%SOLUTION%";
inline constexpr std::size_t kMaxHistory = 3;

/// The reply the deployed template asks for when the code is already correct.
inline constexpr std::string_view kCorrectCodePhrase =
    "Your solution looks good – try running it and share any error messages if they occur!";

inline constexpr std::string_view kReportHeading = "Autoevaluator output:";
inline constexpr std::string_view kReferenceHeading = "Reference solution:";
inline constexpr std::string_view kSolutionFirstInstruction =
    "Produce a complete correct solution to the following problem. Respond with the code only.";

enum class Strategy { single_shot, solution_first };
const char* to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

enum class CallContext { live, replay };

struct PromptTemplate {
  std::string id;
  std::string preamble;
  Strategy strategy = Strategy::single_shot;
};

/// Throws InvalidTemplate unless the id is a plain file stem and the
/// preamble holds the solution marker exactly once.
void validate_template(const PromptTemplate& t);

/// Templates live one per file as `<dir>/<id>.txt`.
PromptTemplate load_template(const std::filesystem::path& dir, std::string_view id);
void save_template(const std::filesystem::path& dir, const PromptTemplate& t);
std::vector<std::string> list_templates(const std::filesystem::path& dir);

struct Exchange {
  std::string code_snapshot;
  std::string assistant_response;
  std::chrono::system_clock::time_point at{};
  std::int64_t seq = 0;

  bool operator==(const Exchange&) const = default;
};

enum class Role { system, user, assistant };
const char* to_string(Role r);

struct Message {
  Role role = Role::user;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct AssembledPrompt {
  std::vector<Message> messages;
  std::size_t token_estimate = 0;
  std::string template_id;
  std::string prompt_hash;
  std::string problem_id;
};

/// ceil(bytes / 4).
constexpr std::size_t estimate_tokens(std::string_view s) { return (s.size() + 3) / 4; }

/// The last kMaxHistory exchanges by seq, in seq order.
std::vector<Exchange> truncate_history(std::span<const Exchange> history);

/// Preamble with the marker replaced by `note`; an empty note removes the
/// marker line without leaving a doubled blank line. No recursive expansion.
std::string substitute_solution(std::string_view preamble, std::string_view note);

/// Throws EmptyCode or HistoryTooLong.
AssembledPrompt assemble_prompt(const PromptTemplate& t, const ProblemManifest& m, std::string_view code,
                                std::span<const Exchange> history, const EvalReport* report = nullptr);

/// single_shot: [assemble_prompt]. solution_first (replay only): [A, B] where A
/// asks for a reference solution and B awaits it via attach_reference_solution.
std::vector<AssembledPrompt> render_strategy(const PromptTemplate& t, const ProblemManifest& m,
                                             std::string_view code, std::span<const Exchange> history,
                                             const EvalReport* report, CallContext context);

AssembledPrompt attach_reference_solution(AssembledPrompt b, std::string_view solution);

std::string fence_code(std::string_view code);
/// Contents of the first fenced block, or nullopt.
std::optional<std::string> first_fenced_block(std::string_view content);

std::string hash_messages(const std::vector<Message>& messages);
/// Recomputes hash and token estimate after editing messages.
void finalize(AssembledPrompt& p);

/// Plain-text rendering used for golden files and previews.
std::string render_prompt_text(const AssembledPrompt& p);
nlohmann::json prompt_to_json(const AssembledPrompt& p);
AssembledPrompt prompt_from_json(const nlohmann::json& j);

nlohmann::json exchange_to_json(const Exchange& e);
Exchange exchange_from_json(const nlohmann::json& j);

}  // namespace hwhelp
