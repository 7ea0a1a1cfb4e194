#include "hwhelp/http_api.hpp"

#include <httplib.h>

#include <algorithm>

#include "hwhelp/exchange_log.hpp"
#include "hwhelp/service.hpp"

namespace hwhelp {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, const HelpError& e) { send_json(res, e.status(), e.body()); }

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw HelpError(400, "bad_request", std::string("body is not valid JSON: ") + e.what());
  }
}

std::string dev_token_of(const httplib::Request& req) {
  std::string auth = req.get_header_value("Authorization");
  constexpr std::string_view kBearer = "Bearer ";
  if (auth.starts_with(kBearer)) return auth.substr(kBearer.size());
  return req.get_header_value("X-Dev-Token");
}

void require_dev(const httplib::Request& req, const HelpService& service) {
  if (!service.dev_token_ok(dev_token_of(req))) throw HelpError(401, "unauthorized", "dev token required");
}

/// Runs `fn`, mapping library errors onto JSON error responses.
template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const HelpError& e) {
    send_error(res, e);
  } catch (const UnknownProblem& e) {
    send_json(res, 404, {{"error", "unknown_problem"}, {"message", e.what()}});
  } catch (const MissingPath& e) {
    send_json(res, 404, {{"error", "not_found"}, {"message", e.what()}});
  } catch (const InvalidTemplate& e) {
    send_json(res, 400, {{"error", "invalid_template"}, {"message", e.what()}});
  } catch (const EmptyCode& e) {
    send_json(res, 400, {{"error", "empty_code"}, {"message", e.what()}});
  } catch (const HistoryTooLong& e) {
    send_json(res, 400, {{"error", "history_too_long"}, {"message", e.what()}});
  } catch (const json::exception& e) {
    send_json(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
  } catch (const Error& e) {
    send_json(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
  }
}

PromptTemplate template_from_body(const json& body, const HelpService& service) {
  PromptTemplate t;
  if (body.contains("template_text")) {
    t.id = body.value("template_id", "draft");
    t.preamble = body.at("template_text").get<std::string>();
    validate_template(t);
  } else {
    t = service.get_template(body.value("template_id", service.config().template_id));
  }
  t.strategy = strategy_from_string(body.value("strategy", "single_shot"));
  return t;
}

void handle_help(const httplib::Request& req, httplib::Response& res, HelpService& service) {
  HelpRequest hr = help_request_from_json(parse_body(req));
  auto prepared = std::make_shared<PreparedHelp>(service.prepare(hr));

  if (!hr.stream) {
    try {
      HelpReply reply = service.execute(std::move(*prepared));
      send_json(res, 200, {{"text", reply.text}, {"meta", meta_to_json(reply.meta)}});
    } catch (const HelpError& e) {
      send_error(res, e);
    }
    return;
  }

  res.set_header("Cache-Control", "no-cache");
  res.set_chunked_content_provider("text/event-stream", [&service, prepared](size_t, httplib::DataSink& sink) {
    auto write = [&sink](const std::string& s) { return sink.write(s.data(), s.size()); };
    try {
      HelpReply reply = service.execute(std::move(*prepared), [&](std::string_view chunk) {
        return write(format_sse("", chunk));
      });
      write(format_sse("meta", meta_to_json(reply.meta).dump()));
    } catch (const HelpError& e) {
      json body = e.body();
      body["status"] = e.status();
      write(format_sse("error", body.dump()));
    }
    sink.done();
    return true;
  });
}

std::optional<std::chrono::system_clock::time_point> time_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return parse_timestamp(req.get_param_value(name));
}

}  // namespace

void mount_api(httplib::Server& server, HelpService& service) {
  server.Post("/v1/help", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { handle_help(req, res, service); });
  });

  server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server.Get("/v1/consent", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"text", service.consent_text()}});
  });

  server.Get("/v1/problems", [&service](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& [id, m] : service.catalog()) list.push_back({{"id", id}, {"title", m.title}});
    send_json(res, 200, {{"problems", list}});
  });

  server.Get(R"(/v1/problems/([a-z0-9_]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json j = manifest_to_json(service.catalog().at(req.matches[1].str()));
      if (!service.dev_token_ok(dev_token_of(req))) j.erase("solution_note");
      send_json(res, 200, j);
    });
  });

  server.Get("/v1/dev/templates", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_dev(req, service);
      send_json(res, 200, {{"templates", service.template_ids()}, {"active", service.config().template_id}});
    });
  });

  server.Get(R"(/v1/dev/templates/([A-Za-z0-9_.-]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_dev(req, service);
      std::string id = req.matches[1].str();
      auto t = service.get_template(id);
      const auto& ro = service.config().readonly_templates;
      send_json(res, 200,
                {{"id", t.id}, {"text", t.preamble}, {"readonly", std::find(ro.begin(), ro.end(), id) != ro.end()}});
    });
  });

  server.Put(R"(/v1/dev/templates/([A-Za-z0-9_.-]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_dev(req, service);
      json body = parse_body(req);
      std::string id = req.matches[1].str();
      service.put_template(id, body.at("text").get<std::string>());
      send_json(res, 200, {{"id", id}, {"saved", true}});
    });
  });

  server.Get("/v1/dev/checkpoints", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_dev(req, service);
      json list = json::array();
      auto cps = service.checkpoints();
      for (std::size_t i = 0; i < cps.size(); ++i) {
        json c = checkpoint_to_json(cps[i]);
        c["index"] = i;
        list.push_back(std::move(c));
      }
      send_json(res, 200, {{"checkpoints", list}});
    });
  });

  server.Post("/v1/dev/assemble", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_dev(req, service);
      json body = parse_body(req);
      PromptTemplate t = template_from_body(body, service);
      std::vector<Exchange> history;
      for (const auto& e : body.value("history", json::array())) history.push_back(exchange_from_json(e));
      std::optional<EvalReport> report;
      if (body.contains("eval_report") && !body.at("eval_report").is_null()) report = report_from_json(body.at("eval_report"));
      auto prompts = service.preview(t, body.at("problem_id").get<std::string>(), body.at("code").get<std::string>(),
                                     history, report ? &*report : nullptr);
      json out = json::array();
      json rendered = json::array();
      for (const auto& p : prompts) {
        out.push_back(prompt_to_json(p));
        rendered.push_back(render_prompt_text(p));
      }
      send_json(res, 200, {{"prompts", out}, {"rendered", rendered}});
    });
  });

  server.Post("/v1/dev/replay", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_dev(req, service);
      json body = parse_body(req);
      PromptTemplate t = template_from_body(body, service);

      std::vector<Checkpoint> selected;
      if (body.contains("checkpoints")) {
        for (const auto& c : body.at("checkpoints")) selected.push_back(checkpoint_from_json(c));
      } else {
        auto all = service.checkpoints();
        if (body.contains("checkpoint_indices")) {
          for (const auto& idx : body.at("checkpoint_indices")) {
            auto i = idx.get<std::size_t>();
            if (i >= all.size()) throw HelpError(400, "bad_request", "checkpoint index out of range");
            selected.push_back(all[i]);
          }
        } else {
          selected = std::move(all);
        }
      }
      std::string backend = body.value("backend", "stub");
      if (backend != "stub" && backend != "configured") throw HelpError(400, "bad_request", "backend must be stub or configured");

      auto results = service.replay(t, selected, backend == "configured");
      json rs = json::array();
      for (const auto& r : results) rs.push_back(result_to_json(r));
      send_json(res, 200, {{"results", rs}, {"metrics", metrics_to_json(score_replay(results, selected))}});
    });
  });

  server.Get("/v1/stats", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_dev(req, service);
      UsageWindow window;
      window.from = time_param(req, "from");
      window.to = time_param(req, "to");
      if (req.has_param("run_gap_minutes")) window.run_gap = std::chrono::minutes(std::stoi(req.get_param_value("run_gap_minutes")));
      auto c = service.counters();
      json stats;
      try {
        stats = usage_stats_to_json(service.stats(window));
      } catch (const SinkUnavailable& e) {
        throw HelpError(503, "sink_unavailable", e.what());
      }
      send_json(res, 200,
                {{"usage", stats},
                 {"service",
                  {{"requests", c.requests},
                   {"gated", c.gated},
                   {"backend_calls", c.backend_calls},
                   {"backend_errors", c.backend_errors},
                   {"log_failures", c.log_failures}}}});
    });
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send_json(res, 500, {{"error", "internal"}, {"message", message}});
  });
}

ApiServer::ApiServer(HelpService& service, int worker_threads) : server_(std::make_unique<httplib::Server>()) {
  server_->new_task_queue = [worker_threads] { return new httplib::ThreadPool(static_cast<size_t>(worker_threads)); };
  mount_api(*server_, service);
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  return port_;
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::start_background() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace hwhelp
