#include "hwhelp/okcli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hwhelp/codescan.hpp"
#include "hwhelp/service.hpp"
#include "hwhelp/text.hpp"

#ifndef HWHELP_SOURCE_DIR
#define HWHELP_SOURCE_DIR "."
#endif

namespace hwhelp {

namespace fs = std::filesystem;
using nlohmann::json;

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
}

namespace {

constexpr std::string_view kSyntaxSuffix = ".syntax_check";

struct Options {
  std::string question;
  std::string file;
  bool feedback = false;
  bool local_stub = false;
  std::string catalog;
  std::string service;
  std::string student;
  std::string state_dir;
};

fs::path default_catalog(const EnvLookup& env) {
  if (auto v = env("OK_CATALOG")) return *v;
  if (fs::exists("course/problems")) return "course/problems";
  return fs::path(HWHELP_SOURCE_DIR) / "course" / "problems";
}

fs::path default_state_dir(const EnvLookup& env) {
  if (auto v = env("OK_STATE_DIR")) return *v;
  if (auto v = env("XDG_CONFIG_HOME")) return fs::path(*v) / "hwhelp";
  if (auto v = env("HOME")) return fs::path(*v) / ".config" / "hwhelp";
  return ".hwhelp";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingPath(p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Prints the banner when the marker is absent or records a different banner.
void show_consent_once(const std::string& banner, const fs::path& state_dir, std::ostream& out) {
  fs::path marker = state_dir / "consent.sha256";
  std::string digest = text::sha256_hex(banner);
  std::error_code ec;
  if (fs::exists(marker, ec)) {
    std::ifstream in(marker);
    std::string seen;
    std::getline(in, seen);
    if (text::trim(seen) == digest) return;
  }
  out << banner;
  if (!banner.ends_with('\n')) out << '\n';
  out << '\n';
  fs::create_directories(state_dir, ec);
  std::ofstream(marker) << digest << '\n';
}

int feedback_local(const Options& o, const ProblemManifest& problem, const std::string& source,
                   const EvalReport& report, std::ostream& out, std::ostream& err, const fs::path& catalog_path) {
  ServiceConfig cfg;
  cfg.catalog_path = catalog_path;
  cfg.template_dir = default_asset_dir() / "templates";
  cfg.salt = "local";
  cfg.consent_text = default_consent_text();
  cfg.rate_limit = std::chrono::seconds(0);
  Catalog catalog = load_catalog(catalog_path);
  auto backend = make_backend(cfg.gateway, make_evaluator_predicate(catalog));
  HelpService service(cfg, std::move(catalog), backend);

  HelpRequest req;
  req.student = o.student.empty() ? "local" : o.student;
  req.source = source;
  req.problem_hint = problem.id;
  req.origin = Origin::autoevaluator;
  req.eval_report = report;
  try {
    service.handle_help(req, [&](std::string_view chunk) {
      out << chunk << std::flush;
      return true;
    });
  } catch (const HelpError& e) {
    err << "help unavailable: " << e.what() << "\n";
    return ok_exit::unreachable;
  }
  out << "\n";
  return report.all_passed ? ok_exit::pass : ok_exit::fail;
}

int feedback_remote(const Options& o, const ProblemManifest& problem, const std::string& source,
                    const EvalReport& report, std::ostream& out, std::ostream& err) {
  httplib::Client client(o.service);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);

  json body = {{"student", o.student},
               {"source", source},
               {"problem_hint", problem.id},
               {"origin", "autoevaluator"},
               {"eval_report", report_to_json(report)},
               {"stream", true}};

  SseParser parser;
  int status = 0;
  std::string error_body;
  std::optional<std::string> stream_error;
  auto on_event = [&](const SseEvent& ev) {
    if (ev.event.empty()) {
      out << ev.data << std::flush;
    } else if (ev.event == "error") {
      stream_error = ev.data;
    }
  };

  httplib::Request req;
  req.method = "POST";
  req.path = "/v1/help";
  req.body = body.dump();
  req.set_header("Content-Type", "application/json");
  req.set_header("Accept", "text/event-stream");
  req.response_handler = [&](const httplib::Response& r) {
    status = r.status;
    return true;
  };
  req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
    if (status >= 200 && status < 300) {
      parser.feed(std::string_view(data, len), on_event);
    } else {
      error_body.append(data, len);
    }
    return true;
  };

  auto res = client.send(req);
  if (!res) {
    err << "cannot reach help service at " << o.service << ": " << httplib::to_string(res.error()) << "\n";
    return ok_exit::unreachable;
  }
  parser.finish(on_event);
  if (status < 200 || status >= 300) {
    std::string message = error_body;
    try {
      message = json::parse(error_body).value("message", error_body);
    } catch (const json::exception&) {
    }
    err << "help request failed (" << status << "): " << message << "\n";
    return status >= 500 ? ok_exit::unreachable : ok_exit::fail;
  }
  out << "\n";
  if (stream_error) {
    std::string message = *stream_error;
    try {
      message = json::parse(*stream_error).value("message", message);
    } catch (const json::exception&) {
    }
    err << "help interrupted: " << message << "\n";
    return ok_exit::unreachable;
  }
  return ok_exit::fail;
}

std::string fetch_banner(const std::string& service_url) {
  httplib::Client client(service_url);
  client.set_connection_timeout(5);
  if (auto res = client.Get("/v1/consent"); res && res->status == 200) {
    try {
      return json::parse(res->body).at("text").get<std::string>();
    } catch (const json::exception&) {
    }
  }
  return default_consent_text();
}

}  // namespace

int run_ok(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  Options o;
  CLI::App app{"Run the course tests on a file, optionally asking for AI feedback.", "ok"};
  app.add_option("-q,--question", o.question, "problem id, or <id>.syntax_check")->required();
  app.add_option("file", o.file, "source file")->required();
  app.add_flag("--feedback", o.feedback, "ask the help service about failing tests");
  app.add_flag("--local-stub", o.local_stub, "answer feedback with an offline stub");
  app.add_option("--catalog", o.catalog, "problem manifest directory (env OK_CATALOG)");
  app.add_option("--service", o.service, "help service URL (env OK_SERVICE_URL)");
  app.add_option("--student", o.student, "your pseudonym (env OK_STUDENT)");
  app.add_option("--state-dir", o.state_dir, "where to keep local state (env OK_STATE_DIR)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok_exit::pass;
  } catch (const CLI::ParseError& e) {
    err << "ok: " << e.what() << "\n" << app.help();
    return ok_exit::usage;
  }

  bool syntax_only = o.question.ends_with(kSyntaxSuffix);
  std::string id = syntax_only ? o.question.substr(0, o.question.size() - kSyntaxSuffix.size()) : o.question;
  if (syntax_only && o.feedback) {
    err << "ok: --feedback cannot be combined with .syntax_check\n";
    return ok_exit::usage;
  }

  fs::path catalog_path = o.catalog.empty() ? default_catalog(env) : fs::path(o.catalog);
  Catalog catalog;
  try {
    catalog = load_catalog(catalog_path);
  } catch (const Error& e) {
    err << "ok: cannot load problems: " << e.what() << "\n";
    return ok_exit::usage;
  }
  const ProblemManifest* problem = catalog.find(id);
  if (!problem) {
    err << "ok: unknown problem '" << id << "'\n";
    return ok_exit::unknown_problem;
  }

  std::string source;
  try {
    source = read_file(o.file);
  } catch (const MissingPath&) {
    err << "ok: cannot read " << o.file << "\n";
    return ok_exit::usage;
  }

  if (o.feedback && !o.local_stub) {
    if (o.service.empty()) o.service = env("OK_SERVICE_URL").value_or("");
    if (o.student.empty()) o.student = env("OK_STUDENT").value_or("");
    if (o.service.empty() || o.student.empty()) {
      err << "ok: --feedback needs --service and --student (or OK_SERVICE_URL and OK_STUDENT)\n";
      return ok_exit::usage;
    }
  } else if (o.student.empty()) {
    o.student = env("OK_STUDENT").value_or("");
  }

  try {
    if (syntax_only) {
      SyntaxVerdict v = syntax_check(source, problem->runner);
      if (v.ok) {
        out << "syntax ok\n";
        return ok_exit::pass;
      }
      out << "syntax error\n";
      std::string msg = v.message.value_or("");
      if (v.line) msg = "line " + std::to_string(*v.line) + ": " + msg;
      if (!msg.empty()) out << msg << "\n";
      return ok_exit::fail;
    }

    EvalReport report = run_tests(source, *problem);
    out << format_report(report);
    if (!o.feedback) return report.all_passed ? ok_exit::pass : ok_exit::fail;

    if (report.all_passed) {
      out << "\nFeedback:\n" << kCorrectCodePhrase << "\n";
      return ok_exit::pass;
    }
    fs::path state_dir = o.state_dir.empty() ? default_state_dir(env) : fs::path(o.state_dir);
    out << "\n";
    show_consent_once(o.local_stub ? default_consent_text() : fetch_banner(o.service), state_dir, out);
    out << "Feedback:\n";
    if (o.local_stub) return feedback_local(o, *problem, source, report, out, err, catalog_path);
    return feedback_remote(o, *problem, source, report, out, err);
  } catch (const RunnerUnavailable& e) {
    err << "ok: cannot run tests: " << e.what() << "\n";
    return ok_exit::usage;
  } catch (const Timeout& e) {
    err << "ok: " << e.what() << "\n";
    return ok_exit::fail;
  }
}

}  // namespace hwhelp
