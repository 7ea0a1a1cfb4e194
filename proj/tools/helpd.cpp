// helpd: the help service daemon plus offline replay and usage reports.
#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "hwhelp/http_api.hpp"
#include "hwhelp/service.hpp"

namespace fs = std::filesystem;

namespace {

hwhelp::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(const std::string& config_path, int port_override) {
  auto config = hwhelp::load_service_config(config_path);
  if (port_override >= 0) config.port = port_override;
  auto service = hwhelp::HelpService::create(config);
  hwhelp::ApiServer server(*service);
  int port = server.bind(config.host, config.port);
  if (port < 0) {
    std::cerr << "helpd: cannot bind " << config.host << ":" << config.port << "\n";
    return 1;
  }
  std::cout << "helpd listening on http://" << config.host << ":" << port << " (backend "
            << service->backend().name() << ")" << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  if (!config.session_snapshot.empty()) service->sessions().save_snapshot(config.session_snapshot);
  return 0;
}

struct ReplayArgs {
  std::string catalog = "course/problems";
  std::string checkpoints = "course/checkpoints/intro.jsonl";
  std::string template_dir;
  std::string template_id{hwhelp::kDefaultTemplateId};
  std::string strategy = "single_shot";
  std::string backend = "stub";
  std::string config;
  std::string out;
  std::size_t parallelism = 4;
};

int replay(const ReplayArgs& a) {
  using namespace hwhelp;
  Catalog catalog = load_catalog(a.catalog);
  auto checkpoints = load_checkpoints(a.checkpoints);
  PromptTemplate t = load_template(a.template_dir.empty() ? default_asset_dir() / "templates" : fs::path(a.template_dir),
                                   a.template_id);
  t.strategy = strategy_from_string(a.strategy);

  std::shared_ptr<Backend> backend;
  ReplayOptions options;
  options.parallelism = a.parallelism;
  if (a.backend == "stub") {
    backend = std::make_shared<StubBackend>(StubTable{}, make_evaluator_predicate(catalog));
  } else if (a.backend == "always-correct") {
    backend = std::make_shared<StubBackend>(StubTable{}, [](std::string_view, std::string_view) { return true; });
  } else {
    auto config = load_service_config(a.config);
    backend = make_backend(config.gateway);
    options.params = config.gateway.params;
    options.guard = config.guard;
  }

  auto results = run_replay(t, checkpoints, catalog, *backend, options);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    write_results_jsonl(out, results);
  }
  std::cout << metrics_to_json(score_replay(results, checkpoints)).dump(2) << "\n";
  return 0;
}

int stats(const std::string& log, const std::string& from, const std::string& to) {
  hwhelp::UsageWindow window;
  if (!from.empty()) window.from = hwhelp::parse_timestamp(from);
  if (!to.empty()) window.to = hwhelp::parse_timestamp(to);
  std::cout << hwhelp::usage_stats_to_json(hwhelp::usage_stats(log, window)).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homework help service"};
  app.require_subcommand(1);

  std::string config_path;
  int port = -1;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("-c,--config", config_path, "service config JSON")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("-p,--port", port, "override the configured port (0 picks one)");

  ReplayArgs ra;
  auto* replay_cmd = app.add_subcommand("replay", "replay checkpoints through a prompt template");
  replay_cmd->add_option("--catalog", ra.catalog, "problem manifest directory")->capture_default_str();
  replay_cmd->add_option("--checkpoints", ra.checkpoints, "labeled checkpoints, JSONL")->capture_default_str();
  replay_cmd->add_option("--template-dir", ra.template_dir, "template directory")->capture_default_str();
  replay_cmd->add_option("--template", ra.template_id, "template id")->capture_default_str();
  replay_cmd->add_option("--strategy", ra.strategy, "prompting strategy")->capture_default_str()->check(CLI::IsMember({"single_shot", "solution_first"}));
  replay_cmd->add_option("--backend", ra.backend, "stub answers like the autoevaluator")->capture_default_str()->check(CLI::IsMember({"stub", "always-correct", "configured"}));
  replay_cmd->add_option("--config", ra.config, "service config, for --backend configured");
  replay_cmd->add_option("--out", ra.out, "write per-checkpoint results as JSONL");
  replay_cmd->add_option("-j,--parallelism", ra.parallelism, "concurrent backend calls")->capture_default_str();

  std::string log, from, to;
  auto* stats_cmd = app.add_subcommand("stats", "summarize an exchange log");
  stats_cmd->add_option("--log", log)->required();
  stats_cmd->add_option("--from", from, "ISO-8601 UTC, inclusive");
  stats_cmd->add_option("--to", to, "ISO-8601 UTC, exclusive");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(config_path, port);
    if (*replay_cmd) {
      if (ra.backend == "configured" && ra.config.empty()) {
        std::cerr << "helpd: --backend configured needs --config\n";
        return 2;
      }
      return replay(ra);
    }
    if (*stats_cmd) return stats(log, from, to);
  } catch (const hwhelp::Error& e) {
    std::cerr << "helpd: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
