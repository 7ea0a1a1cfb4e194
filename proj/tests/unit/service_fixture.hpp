#pragma once

#include <memory>

#include "hwhelp/replay.hpp"
#include "hwhelp/service.hpp"
#include "hwhelp/subprocess.hpp"
#include "support.hpp"

namespace testing_support {

// A HelpService over the course catalog with a counting stub and a scratch log.
struct ServiceRig {
  explicit ServiceRig(std::function<void(hwhelp::ServiceConfig&)> tweak = {}, hwhelp::WallClock clock = {}) {
    config.catalog_path = repo_root() / "course" / "problems";
    std::filesystem::create_directories(scratch.path() / "templates");
    std::filesystem::copy(repo_root() / "assets" / "templates", scratch.path() / "templates",
                          std::filesystem::copy_options::recursive);
    config.template_dir = scratch.path() / "templates";
    config.checkpoints_path = repo_root() / "course" / "checkpoints" / "intro.jsonl";
    config.log_path = scratch.path() / "exchanges.jsonl";
    config.salt = "test-salt";
    config.dev_token = "dev-secret";
    config.consent_text = "Code you send is shared with a third-party model.";
    config.rate_limit = std::chrono::seconds(0);
    if (tweak) tweak(config);
    auto catalog = hwhelp::load_catalog(config.catalog_path);
    stub = std::make_shared<hwhelp::StubBackend>(hwhelp::StubTable{}, hwhelp::make_evaluator_predicate(catalog));
    backend = stub;
    service = std::make_unique<hwhelp::HelpService>(config, std::move(catalog), backend, std::move(clock));
  }

  ServiceRig(std::shared_ptr<hwhelp::Backend> custom, std::function<void(hwhelp::ServiceConfig&)> tweak = {})
      : ServiceRig(std::move(tweak)) {
    backend = std::move(custom);
    service = std::make_unique<hwhelp::HelpService>(config, hwhelp::load_catalog(config.catalog_path), backend);
  }

  std::vector<std::string> log_lines() const {
    std::vector<std::string> out;
    std::ifstream in(config.log_path);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
  }

  hwhelp::TempDir scratch;
  hwhelp::ServiceConfig config;
  std::shared_ptr<hwhelp::StubBackend> stub;
  std::shared_ptr<hwhelp::Backend> backend;
  std::unique_ptr<hwhelp::HelpService> service;
};

inline hwhelp::HelpRequest help_request(const std::string& student, const std::string& source) {
  hwhelp::HelpRequest r;
  r.student = student;
  r.source = source;
  return r;
}

}  // namespace testing_support
