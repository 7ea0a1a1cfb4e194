#include "hwhelp/service.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hwhelp/codescan.hpp"
#include "hwhelp/text.hpp"

#ifndef HWHELP_ASSET_DIR
#define HWHELP_ASSET_DIR "assets"
#endif

namespace hwhelp {

using nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

std::filesystem::path default_asset_dir() {
  if (const char* env = std::getenv("HWHELP_ASSET_DIR"); env && *env) return env;
  return HWHELP_ASSET_DIR;
}

namespace {

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::int64_t ms_since(SteadyClock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(SteadyClock::now() - t).count();
}

}  // namespace

std::string default_consent_text() {
  return std::string(text::rtrim(read_text(default_asset_dir() / "consent.txt")));
}

ServiceConfig service_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.catalog_path = resolve(base_dir, j.value("catalog", ""));
    c.template_dir = resolve(base_dir, j.value("templates", ""));
    if (c.template_dir.empty()) c.template_dir = default_asset_dir() / "templates";
    c.template_id = j.value("template_id", c.template_id);
    if (j.contains("readonly_templates")) c.readonly_templates = j.at("readonly_templates").get<std::vector<std::string>>();
    c.log_path = resolve(base_dir, j.value("log", ""));
    c.checkpoints_path = resolve(base_dir, j.value("checkpoints", ""));
    c.session_snapshot = resolve(base_dir, j.value("session_snapshot", ""));
    c.salt = j.value("salt", "");
    c.dev_token = j.value("dev_token", "");
    c.rate_limit = std::chrono::seconds(j.value("rate_limit_seconds", 10));
    c.session_ttl = std::chrono::seconds(j.value("session_ttl_seconds", 48 * 3600));
    c.replay_parallelism = j.value("replay_parallelism", std::size_t{4});
    c.gateway = gateway_config_from_json(j.value("gateway", json::object()));
    if (j.contains("guard")) {
      const auto& g = j.at("guard");
      c.guard.leak_threshold = g.value("leak_threshold", c.guard.leak_threshold);
      c.guard.max_sentences = g.value("max_sentences", c.guard.max_sentences);
      if (g.contains("assertion_phrases")) {
        c.guard.assertion_phrases.clear();
        for (const auto& p : g.at("assertion_phrases")) c.guard.assertion_phrases.push_back(text::to_lower(p.get<std::string>()));
      }
      c.guard.block_on_leak = g.value("block_on_leak", false);
    }
    if (j.contains("consent_text")) {
      c.consent_text = j.at("consent_text").get<std::string>();
    } else if (j.contains("consent_file")) {
      c.consent_text = std::string(text::rtrim(read_text(resolve(base_dir, j.at("consent_file").get<std::string>()))));
    } else {
      c.consent_text = default_consent_text();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid service config: ") + e.what());
  }

  if (c.catalog_path.empty()) throw ConfigError("config: catalog path is required");
  if (c.salt.empty()) throw ConfigError("config: salt must be set");
  if (text::trim(c.consent_text).empty()) throw ConfigError("config: consent banner must not be empty");
  if (c.rate_limit.count() < 0) throw ConfigError("config: rate_limit_seconds must be >= 0");
  if (c.guard.leak_threshold == 0) throw ConfigError("config: guard.leak_threshold must be >= 1");
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return service_config_from_json(j, path.parent_path());
}

const char* to_string(Origin o) {
  switch (o) {
    case Origin::editor: return "editor";
    case Origin::autoevaluator: return "autoevaluator";
    case Origin::workbench: return "workbench";
  }
  return "editor";
}

Origin origin_from_string(std::string_view s) {
  if (s == "editor") return Origin::editor;
  if (s == "autoevaluator") return Origin::autoevaluator;
  if (s == "workbench") return Origin::workbench;
  throw HelpError(400, "bad_request", "unknown origin '" + std::string(s) + "'");
}

HelpRequest help_request_from_json(const json& j) {
  HelpRequest r;
  try {
    r.student = j.at("student").get<std::string>();
    r.source = j.at("source").get<std::string>();
    if (j.contains("problem_hint") && !j.at("problem_hint").is_null()) {
      r.problem_hint = j.at("problem_hint").get<std::string>();
    }
    r.origin = origin_from_string(j.value("origin", "editor"));
    if (j.contains("eval_report") && !j.at("eval_report").is_null()) {
      r.eval_report = report_from_json(j.at("eval_report"));
    }
    r.stream = j.value("stream", false);
  } catch (const json::exception& e) {
    throw HelpError(400, "bad_request", e.what());
  } catch (const HelpError&) {
    throw;
  } catch (const Error& e) {
    throw HelpError(400, "bad_request", e.what());
  }
  return r;
}

json help_request_to_json(const HelpRequest& r) {
  json j = {{"student", r.student}, {"source", r.source}, {"origin", to_string(r.origin)}, {"stream", r.stream}};
  if (r.problem_hint) j["problem_hint"] = *r.problem_hint;
  if (r.eval_report) j["eval_report"] = report_to_json(*r.eval_report);
  return j;
}

json meta_to_json(const HelpMeta& m) {
  return {{"problem_id", m.problem_id},
          {"template_id", m.template_id},
          {"guard", verdict_to_json(m.guard)},
          {"gated", m.gated},
          {"withheld", m.withheld},
          {"latency_ms", m.latency_ms},
          {"first_chunk_ms", m.first_chunk_ms},
          {"prompt_hash", m.prompt_hash},
          {"backend", m.backend}};
}

HelpError::HelpError(int status, std::string code, const std::string& message, json extra)
    : Error(message), status_(status), code_(std::move(code)), extra_(std::move(extra)) {}

json HelpError::body() const {
  json j = extra_.is_object() ? extra_ : json::object();
  j["error"] = code_;
  j["message"] = what();
  return j;
}

// ---------------------------------------------------------------------------

HelpService::HelpService(ServiceConfig config, Catalog catalog, std::shared_ptr<Backend> backend, WallClock clock)
    : config_(std::move(config)),
      catalog_(std::move(catalog)),
      backend_(std::move(backend)),
      replay_stub_(std::make_shared<StubBackend>(StubTable{}, make_evaluator_predicate(catalog_))),
      clock_(std::move(clock)),
      sessions_(config_.session_ttl, clock_) {
  if (text::trim(config_.consent_text).empty()) throw ConfigError("consent banner must not be empty");
  templates_[config_.template_id] = load_template(config_.template_dir, config_.template_id);
  if (!config_.log_path.empty()) log_ = std::make_unique<ExchangeLog>(config_.log_path);
  if (!config_.session_snapshot.empty() && std::filesystem::exists(config_.session_snapshot)) {
    sessions_.load_snapshot(config_.session_snapshot);
  }
}

std::unique_ptr<HelpService> HelpService::create(const ServiceConfig& config, WallClock clock) {
  Catalog catalog = load_catalog(config.catalog_path);
  auto backend = make_backend(config.gateway, make_evaluator_predicate(catalog));
  return std::make_unique<HelpService>(config, std::move(catalog), std::move(backend), std::move(clock));
}

std::chrono::system_clock::time_point HelpService::now() const {
  return clock_ ? clock_() : std::chrono::system_clock::now();
}

ServiceCounters HelpService::counters() const {
  return {requests_.load(), gated_.load(), backend_calls_.load(), backend_errors_.load(), log_failures_.load()};
}

PreparedHelp HelpService::prepare(const HelpRequest& req) {
  PreparedHelp p;
  p.received = SteadyClock::now();
  p.request = req;

  if (text::trim(req.student).empty()) throw HelpError(400, "bad_request", "student pseudonym is required");
  if (text::trim(req.source).empty()) throw HelpError(400, "empty_code", "source is empty");
  if (req.origin == Origin::autoevaluator && !req.eval_report) {
    throw HelpError(400, "bad_request", "autoevaluator requests must carry eval_report");
  }

  DetectionResult detection;
  try {
    detection = detect_problem(req.source, catalog_, req.problem_hint);
  } catch (const UnknownProblem& e) {
    throw HelpError(404, "unknown_problem", e.what(), {{"problem_id", e.id()}});
  }
  if (detection.ambiguous || !detection.chosen) {
    json candidates = json::array();
    for (const auto& s : detection.ranked) candidates.push_back({{"id", s.id}, {"score", s.score}});
    throw HelpError(422, "ambiguous_problem", "cannot tell which problem this code is for; send problem_hint",
                    {{"candidates", candidates}});
  }
  p.problem = &catalog_.at(*detection.chosen);

  if (config_.rate_limit.count() > 0) {
    SessionKey key{req.student, p.problem->id};
    auto t = now();
    std::lock_guard lock(rate_mutex_);
    auto it = last_request_.find(key);
    if (it != last_request_.end() && t - it->second < config_.rate_limit) {
      auto wait = std::chrono::ceil<std::chrono::seconds>(config_.rate_limit - (t - it->second)).count();
      throw HelpError(429, "rate_limited", "wait before asking again about this problem",
                      {{"retry_after_seconds", wait}});
    }
    last_request_[key] = t;
  }

  if (req.eval_report) {
    p.report = *req.eval_report;
  } else {
    try {
      p.report = run_tests(req.source, *p.problem);
    } catch (const Error& e) {
      throw HelpError(503, "runner_unavailable", e.what());
    }
  }
  p.gated = !gate_help(p.report);
  return p;
}

HelpReply HelpService::execute(PreparedHelp prepared, const std::function<bool(std::string_view)>& on_chunk) {
  ++requests_;
  const ProblemManifest& m = *prepared.problem;
  const HelpRequest& req = prepared.request;
  SessionKey key{req.student, m.id};

  HelpReply reply;
  reply.meta.problem_id = m.id;
  reply.meta.template_id = config_.template_id;

  LogRecord rec;
  rec.at = now();
  rec.student_digest = student_digest(config_.salt, req.student);
  rec.problem_id = m.id;
  rec.origin = to_string(req.origin);
  rec.template_id = config_.template_id;

  if (prepared.gated) {
    ++gated_;
    reply.text = std::string(kCorrectCodePhrase);
    reply.meta.gated = true;
    reply.meta.backend = "none";
    reply.meta.guard = run_guard(reply.text, m, config_.guard);
    reply.meta.first_chunk_ms = ms_since(prepared.received);
    if (on_chunk) on_chunk(reply.text);
    reply.meta.latency_ms = ms_since(prepared.received);
    rec.response = reply.text;
    rec.guard = reply.meta.guard;
    rec.gated = true;
    rec.backend = "none";
    rec.latency_ms = reply.meta.latency_ms;
    write_log(rec);
    return reply;
  }

  PromptTemplate tmpl = get_template(config_.template_id);
  std::string code = prompt_code(req.source, m);
  auto history = truncate_history(sessions_.get(key).exchanges);
  AssembledPrompt prompt = assemble_prompt(tmpl, m, code, history, &prepared.report);
  reply.meta.prompt_hash = prompt.prompt_hash;
  reply.meta.backend = backend_->name();
  rec.prompt_hash = prompt.prompt_hash;
  rec.backend = backend_->name();

  const bool buffer = config_.guard.block_on_leak;
  ++backend_calls_;
  auto result = complete(*backend_, prompt, config_.gateway.params, [&](std::string_view chunk) {
    if (reply.meta.first_chunk_ms < 0) reply.meta.first_chunk_ms = ms_since(prepared.received);
    if (buffer || !on_chunk) return true;
    return on_chunk(chunk);
  });
  reply.meta.latency_ms = ms_since(prepared.received);

  if (!result.ok()) {
    ++backend_errors_;
    rec.response = result.text;
    rec.error = std::string(to_string(result.terminal.error)) + ": " + result.terminal.message;
    rec.latency_ms = reply.meta.latency_ms;
    write_log(rec);
    throw HelpError(502, "backend_error", result.terminal.message,
                    {{"kind", to_string(result.terminal.error)},
                     {"partial_text", buffer ? std::string() : result.text},
                     {"meta", meta_to_json(reply.meta)}});
  }

  reply.meta.guard = run_guard(result.text, m, config_.guard);
  reply.text = result.text;
  if (buffer) {
    if (reply.meta.guard.leak) {
      reply.text = std::string(kWithheldResponse);
      reply.meta.withheld = true;
    }
    if (on_chunk) on_chunk(reply.text);
  }
  sessions_.append(key, code, reply.text);

  rec.response = result.text;
  rec.guard = reply.meta.guard;
  rec.latency_ms = reply.meta.latency_ms;
  write_log(rec);
  return reply;
}

HelpReply HelpService::handle_help(const HelpRequest& req, const std::function<bool(std::string_view)>& on_chunk) {
  return execute(prepare(req), on_chunk);
}

void HelpService::write_log(const LogRecord& record) {
  if (!log_) return;
  try {
    log_->write(record);
  } catch (const SinkUnavailable&) {
    ++log_failures_;
  }
}

PromptTemplate HelpService::get_template(const std::string& id) const {
  std::lock_guard lock(templates_mutex_);
  if (auto it = templates_.find(id); it != templates_.end()) return it->second;
  PromptTemplate t = load_template(config_.template_dir, id);
  templates_[id] = t;
  return t;
}

std::vector<std::string> HelpService::template_ids() const { return list_templates(config_.template_dir); }

void HelpService::put_template(const std::string& id, const std::string& text) {
  const auto& ro = config_.readonly_templates;
  if (std::find(ro.begin(), ro.end(), id) != ro.end()) {
    throw HelpError(409, "readonly_template", "template '" + id + "' is read-only; save under a new id");
  }
  PromptTemplate t{id, text, Strategy::single_shot};
  save_template(config_.template_dir, t);
  std::lock_guard lock(templates_mutex_);
  templates_[id] = std::move(t);
}

std::vector<AssembledPrompt> HelpService::preview(const PromptTemplate& t, const std::string& problem_id,
                                                  const std::string& source, std::span<const Exchange> history,
                                                  const EvalReport* report) const {
  const ProblemManifest& m = catalog_.at(problem_id);
  return render_strategy(t, m, prompt_code(source, m), history, report, CallContext::replay);
}

std::vector<Checkpoint> HelpService::checkpoints() const {
  if (config_.checkpoints_path.empty()) return {};
  return load_checkpoints(config_.checkpoints_path);
}

std::vector<ReplayResult> HelpService::replay(const PromptTemplate& t, std::span<const Checkpoint> checkpoints,
                                              bool use_configured_backend) {
  ReplayOptions options;
  options.params = config_.gateway.params;
  options.guard = config_.guard;
  options.parallelism = config_.replay_parallelism;
  Backend& backend = use_configured_backend ? *backend_ : static_cast<Backend&>(*replay_stub_);
  return run_replay(t, checkpoints, catalog_, backend, options);
}

UsageStats HelpService::stats(const UsageWindow& window) const {
  if (config_.log_path.empty()) return {};
  return usage_stats(config_.log_path, window);
}

bool HelpService::dev_token_ok(std::string_view token) const {
  const std::string& expected = config_.dev_token;
  if (expected.empty() || token.size() != expected.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < token.size(); ++i) diff |= static_cast<unsigned char>(token[i] ^ expected[i]);
  return diff == 0;
}

}  // namespace hwhelp
