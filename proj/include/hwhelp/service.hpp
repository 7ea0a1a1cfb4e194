#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hwhelp/catalog.hpp"
#include "hwhelp/error.hpp"
#include "hwhelp/evaluator.hpp"
#include "hwhelp/exchange_log.hpp"
#include "hwhelp/gateway.hpp"
#include "hwhelp/guard.hpp"
#include "hwhelp/promptkit.hpp"
#include "hwhelp/replay.hpp"
#include "hwhelp/session_store.hpp"

namespace hwhelp {

/// Compiled-in location of the repo's assets/ directory.
std::filesystem::path default_asset_dir();

inline constexpr std::string_view kWithheldResponse =
    "I drafted a hint that gave away too much of the answer, so I'm holding it back. "
    "Which part of the problem are you least sure about?";

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path catalog_path;
  std::filesystem::path template_dir;
  std::string template_id{kDefaultTemplateId};
  /// Templates that PUT may not overwrite.
  std::vector<std::string> readonly_templates{std::string(kDefaultTemplateId)};
  std::filesystem::path log_path;  // empty disables logging
  std::filesystem::path checkpoints_path;
  std::filesystem::path session_snapshot;
  std::string salt;
  std::string dev_token;  // empty disables the dev API
  std::string consent_text;
  GatewayConfig gateway;
  GuardConfig guard;
  std::chrono::seconds rate_limit{10};
  std::chrono::seconds session_ttl{std::chrono::hours(48)};
  std::size_t replay_parallelism = 4;
};

/// Parses a config document; relative paths resolve against `base_dir`.
/// Validation failures (missing salt, empty consent banner, ...) throw ConfigError.
ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Default banner from assets/consent.txt.
std::string default_consent_text();

enum class Origin { editor, autoevaluator, workbench };
const char* to_string(Origin o);
Origin origin_from_string(std::string_view s);

struct HelpRequest {
  std::string student;
  std::string source;
  std::optional<std::string> problem_hint;
  Origin origin = Origin::editor;
  std::optional<EvalReport> eval_report;
  bool stream = false;
};

HelpRequest help_request_from_json(const nlohmann::json& j);
nlohmann::json help_request_to_json(const HelpRequest& r);

struct HelpMeta {
  std::string problem_id;
  std::string template_id;
  GuardVerdict guard;
  bool gated = false;
  bool withheld = false;
  std::int64_t latency_ms = 0;
  std::int64_t first_chunk_ms = -1;
  std::string prompt_hash;
  std::string backend;
};

nlohmann::json meta_to_json(const HelpMeta& m);

struct HelpReply {
  std::string text;
  HelpMeta meta;
};

/// A request failure with its HTTP status and JSON body.
class HelpError : public Error {
 public:
  HelpError(int status, std::string code, const std::string& message, nlohmann::json extra = nlohmann::json::object());
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
  nlohmann::json extra_;
};

/// A help request that passed validation, detection, rate limiting and gating.
struct PreparedHelp {
  HelpRequest request;
  const ProblemManifest* problem = nullptr;
  EvalReport report;
  bool gated = false;
  std::chrono::steady_clock::time_point received;
};

struct ServiceCounters {
  std::uint64_t requests = 0;
  std::uint64_t gated = 0;
  std::uint64_t backend_calls = 0;
  std::uint64_t backend_errors = 0;
  std::uint64_t log_failures = 0;
};

class HelpService {
 public:
  HelpService(ServiceConfig config, Catalog catalog, std::shared_ptr<Backend> backend, WallClock clock = {});

  /// Loads the catalog and builds the configured backend (the stub judges code with the evaluator).
  static std::unique_ptr<HelpService> create(const ServiceConfig& config, WallClock clock = {});

  /// Resolves the problem, applies the per-key rate limit, evaluates the code
  /// when the client sent no report, and decides gating. Throws HelpError.
  PreparedHelp prepare(const HelpRequest& req);

  /// Produces the reply, forwarding chunks as they arrive; always writes one log record.
  /// Throws HelpError(502) on backend failure; partial text is in its body.
  HelpReply execute(PreparedHelp prepared, const std::function<bool(std::string_view)>& on_chunk = {});

  HelpReply handle_help(const HelpRequest& req, const std::function<bool(std::string_view)>& on_chunk = {});

  const Catalog& catalog() const { return catalog_; }
  const ServiceConfig& config() const { return config_; }
  SessionStore& sessions() { return sessions_; }
  Backend& backend() { return *backend_; }
  const std::string& consent_text() const { return config_.consent_text; }
  ServiceCounters counters() const;

  PromptTemplate get_template(const std::string& id) const;
  std::vector<std::string> template_ids() const;
  /// Throws InvalidTemplate, or HelpError(409) for read-only ids.
  void put_template(const std::string& id, const std::string& text);

  /// The exact prompts the service would send for this code.
  std::vector<AssembledPrompt> preview(const PromptTemplate& t, const std::string& problem_id,
                                       const std::string& source, std::span<const Exchange> history,
                                       const EvalReport* report) const;

  std::vector<Checkpoint> checkpoints() const;

  /// Replays against the stub (evaluator-judged) or the configured backend.
  std::vector<ReplayResult> replay(const PromptTemplate& t, std::span<const Checkpoint> checkpoints,
                                   bool use_configured_backend);

  UsageStats stats(const UsageWindow& window) const;

  bool dev_token_ok(std::string_view token) const;

 private:
  void write_log(const LogRecord& record);
  std::chrono::system_clock::time_point now() const;

  ServiceConfig config_;
  Catalog catalog_;
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<StubBackend> replay_stub_;
  WallClock clock_;
  SessionStore sessions_;
  std::unique_ptr<ExchangeLog> log_;

  mutable std::mutex templates_mutex_;
  mutable std::map<std::string, PromptTemplate> templates_;

  std::mutex rate_mutex_;
  std::map<SessionKey, std::chrono::system_clock::time_point> last_request_;

  std::atomic<std::uint64_t> requests_{0}, gated_{0}, backend_calls_{0}, backend_errors_{0}, log_failures_{0};
};

}  // namespace hwhelp
