#include "hwhelp/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hwhelp/error.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

using nlohmann::json;

const ProblemManifest* Catalog::find(std::string_view id) const {
  auto it = problems_.find(id);
  return it == problems_.end() ? nullptr : &it->second;
}

const ProblemManifest& Catalog::at(std::string_view id) const {
  if (const auto* m = find(id)) return *m;
  throw UnknownProblem(std::string(id));
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  out.reserve(problems_.size());
  for (const auto& [id, _] : problems_) out.push_back(id);
  return out;
}

void Catalog::insert(ProblemManifest m) {
  if (problems_.contains(m.id)) throw DuplicateId(m.id);
  std::string id = m.id;
  problems_.emplace(std::move(id), std::move(m));
}

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingPath(p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ProblemManifest manifest_from_json(const json& j) {
  ProblemManifest m;
  m.id = j.at("id").get<std::string>();
  m.title = j.value("title", "");
  m.statement = j.at("statement").get<std::string>();
  m.entry_points = string_list(j, "entry_points");
  m.scaffold = j.value("scaffold", "");
  for (const auto& t : j.at("tests")) {
    TestCase tc;
    tc.call = t.at("call").get<std::string>();
    tc.expected = t.value("expected", "");
    tc.timeout_ms = t.value("timeout_ms", kDefaultTestTimeoutMs);
    m.tests.push_back(std::move(tc));
  }
  if (j.contains("solution_note") && !j.at("solution_note").is_null()) {
    m.solution_note = j.at("solution_note").get<std::string>();
  }
  if (j.contains("constraints")) {
    const auto& c = j.at("constraints");
    m.constraints.forbidden_identifiers = string_list(c, "forbidden_identifiers");
    m.constraints.required_identifiers = string_list(c, "required_identifiers");
    m.constraints.recursion_expected = c.value("recursion_expected", false);
  }
  if (j.contains("runner")) {
    const auto& r = j.at("runner");
    RunnerSpec defaults;
    if (r.contains("command")) m.runner.command = string_list(r, "command");
    if (r.contains("syntax_check_command")) m.runner.syntax_check_command = string_list(r, "syntax_check_command");
    m.runner.print_template = r.value("print_template", defaults.print_template);
    m.runner.file_name = r.value("file_name", defaults.file_name);
  }
  return m;
}

json manifest_to_json(const ProblemManifest& m) {
  json tests = json::array();
  for (const auto& t : m.tests) tests.push_back({{"call", t.call}, {"expected", t.expected}, {"timeout_ms", t.timeout_ms}});
  json j = {
      {"id", m.id},
      {"title", m.title},
      {"statement", m.statement},
      {"entry_points", m.entry_points},
      {"scaffold", m.scaffold},
      {"tests", tests},
      {"constraints",
       {{"forbidden_identifiers", m.constraints.forbidden_identifiers},
        {"required_identifiers", m.constraints.required_identifiers},
        {"recursion_expected", m.constraints.recursion_expected}}},
      {"runner",
       {{"command", m.runner.command},
        {"syntax_check_command", m.runner.syntax_check_command},
        {"print_template", m.runner.print_template},
        {"file_name", m.runner.file_name}}},
  };
  if (m.solution_note) j["solution_note"] = *m.solution_note;
  return j;
}

std::string serialize_manifest(const ProblemManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

ProblemManifest parse_manifest(std::string_view json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin, line_of_offset(json_text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  try {
    return manifest_from_json(j);
  } catch (const json::exception& e) {
    // Structural errors have no byte position; report the document start.
    throw ParseError(origin, 1, e.what());
  }
}

Catalog load_catalog(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw MissingPath(path.string());

  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }

  Catalog catalog;
  for (const auto& file : files) {
    ProblemManifest m = parse_manifest(read_file(file), file.string());
    if (auto violations = validate_manifest(m); !violations.empty()) {
      throw InvalidManifest(file.string(), std::move(violations));
    }
    catalog.insert(std::move(m));
  }
  return catalog;
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [id, m] : catalog) {
    std::ofstream out(dir / (id + ".json"), std::ios::binary);
    out << serialize_manifest(m);
  }
}

std::vector<std::string> validate_manifest(const ProblemManifest& m) {
  static const std::regex kIdPattern("[a-z0-9_]+");
  std::vector<std::string> v;

  if (!std::regex_match(m.id, kIdPattern)) v.push_back("id '" + m.id + "' must match [a-z0-9_]+");
  if (m.entry_points.empty()) v.push_back("entry_points must be non-empty");
  if (m.tests.empty()) v.push_back("tests must be non-empty");

  for (std::size_t i = 0; i < m.tests.size(); ++i) {
    if (text::trim(m.tests[i].call).empty()) v.push_back("test " + std::to_string(i) + ": call must be non-empty");
    if (m.tests[i].timeout_ms <= 0) v.push_back("test " + std::to_string(i) + ": timeout_ms must be positive");
  }

  std::set<std::string_view> defined;
  for (const auto& line : text::split_lines(m.scaffold)) {
    if (auto name = text::top_level_def_name(line.body); !name.empty()) defined.insert(name);
  }
  for (const auto& ep : m.entry_points) {
    if (!defined.contains(ep)) v.push_back("entry point '" + ep + "' is not defined in scaffold");
  }

  for (const auto& f : m.constraints.forbidden_identifiers) {
    const auto& req = m.constraints.required_identifiers;
    if (std::find(req.begin(), req.end(), f) != req.end()) {
      v.push_back("identifier '" + f + "' is both forbidden and required");
    }
  }

  auto check_command = [&v](const std::vector<std::string>& cmd, const char* name) {
    std::size_t count = 0;
    for (const auto& arg : cmd) {
      for (std::size_t pos = arg.find("{file}"); pos != std::string::npos; pos = arg.find("{file}", pos + 1)) ++count;
    }
    if (count != 1) v.push_back(std::string("runner.") + name + " must contain {file} exactly once");
  };
  check_command(m.runner.command, "command");
  check_command(m.runner.syntax_check_command, "syntax_check_command");
  return v;
}

std::string solution_note_text(const ProblemManifest& m) { return m.solution_note.value_or(""); }

}  // namespace hwhelp
