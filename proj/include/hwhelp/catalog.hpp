#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hwhelp {

inline constexpr int kDefaultTestTimeoutMs = 2000;

struct TestCase {
  std::string call;
  std::string expected;
  int timeout_ms = kDefaultTestTimeoutMs;

  bool operator==(const TestCase&) const = default;
};

struct ConstraintSet {
  std::vector<std::string> forbidden_identifiers;
  std::vector<std::string> required_identifiers;
  bool recursion_expected = false;

  bool operator==(const ConstraintSet&) const = default;
};

/// How student code is executed. Every command holds the `{file}` token
/// exactly once; it is replaced by the submission path.
struct RunnerSpec {
  std::vector<std::string> command{"python3", "{file}"};
  std::vector<std::string> syntax_check_command{"python3", "-m", "py_compile", "{file}"};
  /// Statement appended to the submission to print a test call; `{call}` is substituted.
  std::string print_template = "print({call})";
  std::string file_name = "submission.py";

  bool operator==(const RunnerSpec&) const = default;
};

struct ProblemManifest {
  std::string id;
  std::string title;
  std::string statement;
  std::vector<std::string> entry_points;
  std::string scaffold;
  std::vector<TestCase> tests;
  std::optional<std::string> solution_note;
  ConstraintSet constraints;
  RunnerSpec runner;

  bool operator==(const ProblemManifest&) const = default;
};

/// Immutable after load; iteration is ordered by id.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::map<std::string, ProblemManifest> problems) : problems_(problems.begin(), problems.end()) {}

  const ProblemManifest* find(std::string_view id) const;
  /// Throws UnknownProblem.
  const ProblemManifest& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  std::size_t size() const { return problems_.size(); }
  bool empty() const { return problems_.empty(); }
  std::vector<std::string> ids() const;

  auto begin() const { return problems_.begin(); }
  auto end() const { return problems_.end(); }

  /// Adds a manifest; throws DuplicateId.
  void insert(ProblemManifest m);

 private:
  std::map<std::string, ProblemManifest, std::less<>> problems_;
};

/// Loads a directory of `*.json` manifests (non-recursive) or a single manifest file.
/// Throws MissingPath, ParseError, DuplicateId or InvalidManifest.
Catalog load_catalog(const std::filesystem::path& path);

ProblemManifest parse_manifest(std::string_view json_text, const std::string& origin = "<memory>");
ProblemManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const ProblemManifest& m);
std::string serialize_manifest(const ProblemManifest& m);

/// Writes one `<id>.json` per problem into `dir`.
void save_catalog(const Catalog& catalog, const std::filesystem::path& dir);

/// Every invariant violation, in a fixed order; empty means valid.
std::vector<std::string> validate_manifest(const ProblemManifest& m);

/// The solution note verbatim, or "" when the problem has none.
std::string solution_note_text(const ProblemManifest& m);

}  // namespace hwhelp
