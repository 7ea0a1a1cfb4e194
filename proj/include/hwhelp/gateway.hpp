#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
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

#include "hwhelp/promptkit.hpp"

namespace hwhelp {

struct CompletionParams {
  std::string model = "deepseek-r1";
  double temperature = 0.7;
  int max_output_tokens = 256;
  std::chrono::milliseconds request_timeout{30000};
};

enum class EventKind { chunk, done, error };

enum class ErrorKind { none, auth, timeout, rate_limited, malformed, transport, cancelled };
const char* to_string(ErrorKind k);

struct CompletionEvent {
  EventKind kind = EventKind::chunk;
  std::string text;           // chunk
  std::string finish_reason;  // done
  std::int64_t latency_first_chunk_ms = -1;  // done; -1 when no chunk arrived
  ErrorKind error = ErrorKind::none;         // error
  std::string message;                       // error
  std::size_t partial_length = 0;            // error: bytes of chunk text already delivered

  static CompletionEvent chunk(std::string text);
  static CompletionEvent done(std::string finish_reason, std::int64_t latency_ms);
  static CompletionEvent failure(ErrorKind kind, std::string message, std::size_t partial);
};

/// Receives events in order; returning false cancels the stream.
using EventSink = std::function<bool(const CompletionEvent&)>;

/// A completion backend. Every stream is zero or more chunk events followed
/// by exactly one done or error event. Implementations are shareable across threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual void complete_stream(const AssembledPrompt& prompt, const CompletionParams& params,
                               const EventSink& sink) = 0;
};

struct CompletionResult {
  std::string text;
  std::vector<std::string> chunks;
  CompletionEvent terminal;

  bool ok() const { return terminal.kind == EventKind::done; }
};

/// Drives a stream to completion, forwarding chunks to `on_chunk` when given.
CompletionResult complete(Backend& backend, const AssembledPrompt& prompt, const CompletionParams& params,
                          const std::function<bool(std::string_view)>& on_chunk = {});

// ---------------------------------------------------------------------------
// Stub backend

inline constexpr std::string_view kStubQuestion =
    "I see an issue near your conditional — which branch runs when b is negative?";

/// prompt hash -> chunks of the canned response.
using StubTable = std::map<std::string, std::vector<std::string>>;

/// JSON object of hash -> text (split into two chunks) or hash -> [chunk, ...].
StubTable parse_stub_table(const nlohmann::json& j);
StubTable load_stub_table(const std::filesystem::path& path);

/// Whether the code in the final user message is considered correct.
using CodePredicate = std::function<bool(std::string_view problem_id, std::string_view code)>;

/// Splits at the space nearest the middle; texts without an inner space stay whole.
std::vector<std::string> split_in_two(std::string_view text);

/// Table lookup by prompt hash, otherwise the default rule on the final user message's code.
std::vector<std::string> stub_complete(const AssembledPrompt& prompt, const StubTable& table,
                                       const CodePredicate& predicate);

inline constexpr std::size_t kStubPromptHistory = 256;

class StubBackend final : public Backend {
 public:
  explicit StubBackend(StubTable table = {}, CodePredicate predicate = {});

  std::string name() const override { return "stub"; }
  void complete_stream(const AssembledPrompt& prompt, const CompletionParams& params, const EventSink& sink) override;

  std::uint64_t calls() const { return calls_.load(); }
  /// The most recent prompts received, oldest first (at most kStubPromptHistory).
  std::vector<AssembledPrompt> prompts() const;
  void clear_prompts();

 private:
  StubTable table_;
  CodePredicate predicate_;
  std::atomic<std::uint64_t> calls_{0};
  mutable std::mutex mutex_;
  std::vector<AssembledPrompt> prompts_;
};

// ---------------------------------------------------------------------------
// Server-sent events

struct SseEvent {
  std::string event;  // empty for the default "message" type
  std::string data;
};

/// Incremental SSE decoder; tolerant of arbitrary chunk boundaries and CRLF.
class SseParser {
 public:
  template <typename F>
  void feed(std::string_view bytes, F&& on_event) {
    buffer_.append(bytes);
    std::size_t nl;
    while ((nl = buffer_.find('\n')) != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (auto ev = take_line(line)) on_event(*ev);
    }
  }
  /// Dispatches a trailing event that was not terminated by a blank line.
  template <typename F>
  void finish(F&& on_event) {
    if (!buffer_.empty()) {
      std::string line = std::move(buffer_);
      buffer_.clear();
      if (auto ev = take_line(line)) on_event(*ev);
    }
    if (auto ev = take_line("")) on_event(*ev);
  }

 private:
  std::optional<SseEvent> take_line(const std::string& line);

  std::string buffer_;
  SseEvent pending_;
  bool has_data_ = false;
};

std::string format_sse(std::string_view event, std::string_view data);

// ---------------------------------------------------------------------------
// Remote chat-completions backend

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

struct TransportOutcome {
  int status = 0;  // 0 when no HTTP response was received
  bool timed_out = false;
  std::string error;
  std::optional<int> retry_after_seconds;
};

/// Minimal HTTP POST with a streamed body. `on_status` runs once headers
/// arrive; `on_body` receives body bytes and may return false to abort.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual TransportOutcome post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                                std::chrono::milliseconds timeout, const std::function<void(int)>& on_status,
                                const std::function<bool(std::string_view)>& on_body) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport();

struct RemoteConfig {
  std::string endpoint;  // full URL of the chat-completions resource
  std::string api_key;
  std::chrono::milliseconds max_retry_wait{5000};
};

nlohmann::json chat_request_json(const AssembledPrompt& prompt, const CompletionParams& params, bool stream = true);

class RemoteBackend final : public Backend {
 public:
  RemoteBackend(RemoteConfig config, std::shared_ptr<HttpTransport> transport);

  std::string name() const override { return "remote"; }
  void complete_stream(const AssembledPrompt& prompt, const CompletionParams& params, const EventSink& sink) override;

 private:
  RemoteConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

// ---------------------------------------------------------------------------

struct GatewayConfig {
  std::string backend = "stub";  // "stub" or "remote"
  RemoteConfig remote;
  CompletionParams params;
  std::string stub_table_path;
};

/// Reads the "gateway" config object, falling back to HWHELP_LLM_ENDPOINT,
/// HWHELP_LLM_API_KEY and HWHELP_LLM_MODEL for unset remote fields.
GatewayConfig gateway_config_from_json(const nlohmann::json& j);

std::shared_ptr<Backend> make_backend(const GatewayConfig& config, CodePredicate predicate = {});

}  // namespace hwhelp
