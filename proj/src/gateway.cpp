#include "hwhelp/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "hwhelp/error.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::none: return "none";
    case ErrorKind::auth: return "auth";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::rate_limited: return "rate_limited";
    case ErrorKind::malformed: return "malformed";
    case ErrorKind::transport: return "transport";
    case ErrorKind::cancelled: return "cancelled";
  }
  return "none";
}

CompletionEvent CompletionEvent::chunk(std::string text) {
  CompletionEvent e;
  e.kind = EventKind::chunk;
  e.text = std::move(text);
  return e;
}

CompletionEvent CompletionEvent::done(std::string finish_reason, std::int64_t latency_ms) {
  CompletionEvent e;
  e.kind = EventKind::done;
  e.finish_reason = std::move(finish_reason);
  e.latency_first_chunk_ms = latency_ms;
  return e;
}

CompletionEvent CompletionEvent::failure(ErrorKind kind, std::string message, std::size_t partial) {
  CompletionEvent e;
  e.kind = EventKind::error;
  e.error = kind;
  e.message = std::move(message);
  e.partial_length = partial;
  return e;
}

CompletionResult complete(Backend& backend, const AssembledPrompt& prompt, const CompletionParams& params,
                          const std::function<bool(std::string_view)>& on_chunk) {
  CompletionResult result;
  bool terminated = false;
  backend.complete_stream(prompt, params, [&](const CompletionEvent& ev) {
    if (ev.kind == EventKind::chunk) {
      result.text += ev.text;
      result.chunks.push_back(ev.text);
      return on_chunk ? on_chunk(ev.text) : true;
    }
    result.terminal = ev;
    terminated = true;
    return true;
  });
  if (!terminated) {
    result.terminal = CompletionEvent::failure(ErrorKind::transport, "stream ended without a terminal event",
                                               result.text.size());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Stub

std::vector<std::string> split_in_two(std::string_view text) {
  if (text.empty()) return {};
  std::size_t mid = text.size() / 2;
  std::size_t best = std::string_view::npos;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    if (text[i] != ' ') continue;
    auto dist = [mid](std::size_t p) { return p > mid ? p - mid : mid - p; };
    if (best == std::string_view::npos || dist(i) < dist(best)) best = i;
  }
  if (best == std::string_view::npos) return {std::string(text)};
  return {std::string(text.substr(0, best + 1)), std::string(text.substr(best + 1))};
}

StubTable parse_stub_table(const json& j) {
  StubTable table;
  for (const auto& [hash, value] : j.items()) {
    if (value.is_string()) {
      table[hash] = split_in_two(value.get<std::string>());
    } else {
      table[hash] = value.get<std::vector<std::string>>();
    }
  }
  return table;
}

StubTable load_stub_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPath(path.string());
  try {
    return parse_stub_table(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

std::vector<std::string> stub_complete(const AssembledPrompt& prompt, const StubTable& table,
                                       const CodePredicate& predicate) {
  if (auto it = table.find(prompt.prompt_hash); it != table.end()) return it->second;
  bool correct = false;
  if (predicate && !prompt.messages.empty()) {
    const std::string& last = prompt.messages.back().content;
    std::string code = first_fenced_block(last).value_or(last);
    correct = predicate(prompt.problem_id, code);
  }
  return split_in_two(correct ? kCorrectCodePhrase : kStubQuestion);
}

StubBackend::StubBackend(StubTable table, CodePredicate predicate)
    : table_(std::move(table)), predicate_(std::move(predicate)) {}

void StubBackend::complete_stream(const AssembledPrompt& prompt, const CompletionParams&, const EventSink& sink) {
  const auto started = Clock::now();
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    if (prompts_.size() >= kStubPromptHistory) prompts_.erase(prompts_.begin());
    prompts_.push_back(prompt);
  }
  auto chunks = stub_complete(prompt, table_, predicate_);
  std::int64_t first_latency = -1;
  std::size_t delivered = 0;
  for (auto& c : chunks) {
    if (first_latency < 0) {
      first_latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
    }
    delivered += c.size();
    if (!sink(CompletionEvent::chunk(c))) {
      sink(CompletionEvent::failure(ErrorKind::cancelled, "cancelled by consumer", delivered));
      return;
    }
  }
  sink(CompletionEvent::done("stop", first_latency));
}

std::vector<AssembledPrompt> StubBackend::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

void StubBackend::clear_prompts() {
  std::lock_guard lock(mutex_);
  prompts_.clear();
}

// ---------------------------------------------------------------------------
// SSE

std::optional<SseEvent> SseParser::take_line(const std::string& line) {
  if (line.empty()) {
    if (!has_data_) {
      pending_ = {};
      return std::nullopt;
    }
    SseEvent ev = std::move(pending_);
    pending_ = {};
    has_data_ = false;
    return ev;
  }
  if (line.front() == ':') return std::nullopt;
  std::string_view field = line;
  std::string_view value;
  if (auto colon = line.find(':'); colon != std::string::npos) {
    field = std::string_view(line).substr(0, colon);
    value = std::string_view(line).substr(colon + 1);
    if (value.starts_with(' ')) value.remove_prefix(1);
  }
  if (field == "data") {
    if (has_data_) pending_.data += '\n';
    pending_.data += value;
    has_data_ = true;
  } else if (field == "event") {
    pending_.event = std::string(value);
  }
  return std::nullopt;
}

std::string format_sse(std::string_view event, std::string_view data) {
  std::string out;
  if (!event.empty()) {
    out += "event: ";
    out += event;
    out += "\n";
  }
  auto lines = text::split_lines(data);
  if (lines.empty() || data.ends_with('\n')) {
    // split_lines drops a trailing empty line; SSE must carry it explicitly.
    for (const auto& l : lines) out += "data: " + std::string(l.body) + "\n";
    out += "data: \n";
  } else {
    for (const auto& l : lines) out += "data: " + std::string(l.body) + "\n";
  }
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Remote

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw ConfigError("invalid endpoint URL: " + url);
  return {m[1], m[2].matched ? std::string(m[2]) : std::string("/")};
}

class HttplibTransport final : public HttpTransport {
 public:
  TransportOutcome post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                        std::chrono::milliseconds timeout, const std::function<void(int)>& on_status,
                        const std::function<bool(std::string_view)>& on_body) override {
    TransportOutcome outcome;
    ParsedUrl parsed;
    try {
      parsed = parse_url(url);
    } catch (const ConfigError& e) {
      outcome.error = e.what();
      return outcome;
    }
    httplib::Client client(parsed.origin);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    const auto started = Clock::now();
    bool deadline_hit = false;
    httplib::Request req;
    req.method = "POST";
    req.path = parsed.path;
    for (const auto& [k, v] : headers) req.set_header(k, v);
    req.body = body;
    req.response_handler = [&](const httplib::Response& res) {
      outcome.status = res.status;
      if (res.has_header("Retry-After")) {
        try {
          outcome.retry_after_seconds = std::stoi(res.get_header_value("Retry-After"));
        } catch (const std::exception&) {
        }
      }
      on_status(res.status);
      return true;
    };
    req.content_receiver = [&](const char* data, size_t n, uint64_t, uint64_t) {
      if (Clock::now() - started > timeout) {
        deadline_hit = true;
        return false;
      }
      return on_body(std::string_view(data, n));
    };
    auto result = client.send(req);
    if (!result) {
      auto err = result.error();
      outcome.timed_out = deadline_hit || err == httplib::Error::ConnectionTimeout ||
                          (err == httplib::Error::Read && Clock::now() - started >= timeout);
      if (err != httplib::Error::Canceled || deadline_hit) outcome.error = httplib::to_string(err);
    }
    return outcome;
  }
};

std::string error_detail(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (j.contains("error")) {
      const auto& e = j.at("error");
      if (e.is_object() && e.contains("message")) return e.at("message").get<std::string>();
      if (e.is_string()) return e.get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return std::string(text::trim(body)).substr(0, 200);
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

json chat_request_json(const AssembledPrompt& prompt, const CompletionParams& params, bool stream) {
  json messages = json::array();
  for (const auto& m : prompt.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"model", params.model},
          {"messages", messages},
          {"temperature", params.temperature},
          {"max_tokens", params.max_output_tokens},
          {"stream", stream}};
}

RemoteBackend::RemoteBackend(RemoteConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (!transport_) transport_ = make_http_transport();
}

void RemoteBackend::complete_stream(const AssembledPrompt& prompt, const CompletionParams& params,
                                    const EventSink& sink) {
  if (config_.endpoint.empty() || config_.api_key.empty()) {
    sink(CompletionEvent::failure(ErrorKind::auth, "remote backend has no endpoint or credential", 0));
    return;
  }
  const auto started = Clock::now();
  const std::string body = chat_request_json(prompt, params, true).dump();
  const HttpHeaders headers{{"Authorization", "Bearer " + config_.api_key},
                            {"Content-Type", "application/json"},
                            {"Accept", "text/event-stream"}};

  std::size_t delivered = 0;
  std::int64_t first_latency = -1;

  for (int attempt = 0; attempt < 2; ++attempt) {
    int status = 0;
    std::string raw;  // non-2xx body, or 2xx body kept for the non-streaming fallback
    bool saw_sse = false, finished = false, malformed = false, cancelled = false;
    std::string finish_reason, malformed_detail;
    SseParser parser;

    auto on_event = [&](const SseEvent& ev) {
      if (finished || malformed || cancelled) return;
      saw_sse = true;
      if (ev.data == "[DONE]") {
        finished = true;
        return;
      }
      json j;
      try {
        j = json::parse(ev.data);
        const auto& choice = j.at("choices").at(0);
        if (choice.contains("delta")) {
          const auto& delta = choice.at("delta");
          // Reasoning tokens are not shown to students.
          if (delta.contains("content") && delta.at("content").is_string()) {
            std::string piece = delta.at("content").get<std::string>();
            if (!piece.empty()) {
              if (first_latency < 0) {
                first_latency =
                    std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
              }
              delivered += piece.size();
              if (!sink(CompletionEvent::chunk(std::move(piece)))) cancelled = true;
            }
          }
        }
        if (choice.contains("finish_reason") && choice.at("finish_reason").is_string()) {
          finish_reason = choice.at("finish_reason").get<std::string>();
        }
      } catch (const json::exception& e) {
        malformed = true;
        malformed_detail = e.what();
      }
    };

    auto outcome = transport_->post(
        config_.endpoint, headers, body, params.request_timeout, [&](int s) { status = s; },
        [&](std::string_view bytes) {
          if (status < 200 || status >= 300) {
            if (raw.size() < 64 * 1024) raw.append(bytes);
            return true;
          }
          if (!saw_sse && raw.size() < 1024 * 1024) raw.append(bytes);
          parser.feed(bytes, on_event);
          return !(malformed || cancelled);
        });
    if (status == 0) status = outcome.status;
    if (status >= 200 && status < 300) parser.finish(on_event);

    if (cancelled) {
      sink(CompletionEvent::failure(ErrorKind::cancelled, "cancelled by consumer", delivered));
      return;
    }
    if (status == 429 && attempt == 0 && delivered == 0) {
      auto wait = std::chrono::milliseconds(1000LL * outcome.retry_after_seconds.value_or(1));
      std::this_thread::sleep_for(std::min(wait, config_.max_retry_wait));
      continue;
    }
    if (outcome.timed_out) {
      sink(CompletionEvent::failure(ErrorKind::timeout, "request timed out", delivered));
      return;
    }
    if (status == 0) {
      sink(CompletionEvent::failure(ErrorKind::transport, outcome.error.empty() ? "no response" : outcome.error,
                                    delivered));
      return;
    }
    if (status == 401 || status == 403) {
      sink(CompletionEvent::failure(ErrorKind::auth, "credential rejected: " + error_detail(raw), delivered));
      return;
    }
    if (status == 429) {
      sink(CompletionEvent::failure(ErrorKind::rate_limited, "rate limited by provider", delivered));
      return;
    }
    if (status < 200 || status >= 300) {
      sink(CompletionEvent::failure(ErrorKind::transport,
                                    "HTTP " + std::to_string(status) + ": " + error_detail(raw), delivered));
      return;
    }
    if (malformed) {
      sink(CompletionEvent::failure(ErrorKind::malformed, "malformed stream event: " + malformed_detail, delivered));
      return;
    }
    if (!saw_sse) {
      // Provider ignored stream=true and answered with a single JSON body.
      try {
        auto j = json::parse(raw);
        const auto& choice = j.at("choices").at(0);
        std::string content = choice.at("message").at("content").get<std::string>();
        finish_reason = choice.value("finish_reason", "stop");
        first_latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
        if (!content.empty()) {
          delivered += content.size();
          if (!sink(CompletionEvent::chunk(std::move(content)))) {
            sink(CompletionEvent::failure(ErrorKind::cancelled, "cancelled by consumer", delivered));
            return;
          }
        }
        sink(CompletionEvent::done(finish_reason, first_latency));
      } catch (const json::exception& e) {
        sink(CompletionEvent::failure(ErrorKind::malformed, std::string("unparseable response: ") + e.what(),
                                      delivered));
      }
      return;
    }
    if (!outcome.error.empty() || (!finished && finish_reason.empty())) {
      sink(CompletionEvent::failure(ErrorKind::transport,
                                    outcome.error.empty() ? "stream ended early" : outcome.error, delivered));
      return;
    }
    sink(CompletionEvent::done(finish_reason.empty() ? "stop" : finish_reason, first_latency));
    return;
  }
}

// ---------------------------------------------------------------------------

namespace {
std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}
}  // namespace

GatewayConfig gateway_config_from_json(const json& j) {
  GatewayConfig c;
  c.backend = j.value("backend", c.backend);
  c.stub_table_path = j.value("stub_table", "");
  c.remote.endpoint = j.value("endpoint", "");
  c.remote.api_key = j.value("api_key", "");
  c.params.model = j.value("model", "");
  c.params.temperature = j.value("temperature", c.params.temperature);
  c.params.max_output_tokens = j.value("max_output_tokens", c.params.max_output_tokens);
  c.params.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", 30000));

  c.remote.endpoint = c.remote.endpoint.empty() ? env_or("HWHELP_LLM_ENDPOINT", "") : c.remote.endpoint;
  c.remote.api_key = c.remote.api_key.empty() ? env_or("HWHELP_LLM_API_KEY", "") : c.remote.api_key;
  c.params.model = c.params.model.empty() ? env_or("HWHELP_LLM_MODEL", "deepseek-r1") : c.params.model;

  if (c.backend != "stub" && c.backend != "remote") throw ConfigError("unknown backend: " + c.backend);
  if (c.params.max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
  if (c.params.temperature < 0) throw ConfigError("temperature must be >= 0");
  return c;
}

std::shared_ptr<Backend> make_backend(const GatewayConfig& config, CodePredicate predicate) {
  if (config.backend == "remote") {
    if (config.remote.endpoint.empty()) throw ConfigError("remote backend requires an endpoint");
    if (config.remote.api_key.empty()) throw ConfigError("remote backend requires a credential");
    return std::make_shared<RemoteBackend>(config.remote, make_http_transport());
  }
  StubTable table;
  if (!config.stub_table_path.empty()) table = load_stub_table(config.stub_table_path);
  return std::make_shared<StubBackend>(std::move(table), std::move(predicate));
}

}  // namespace hwhelp
