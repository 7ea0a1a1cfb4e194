#include <gtest/gtest.h>

#include <functional>

#include "hwhelp/catalog.hpp"
#include "hwhelp/error.hpp"
#include "hwhelp/subprocess.hpp"
#include "support.hpp"

using namespace hwhelp;
using testing_support::course;

TEST(Catalog, LoadsCourseProblems) {
  Catalog c = course();
  EXPECT_EQ(c.ids(), (std::vector<std::string>{"add_abs_value", "largest_factor", "two_of_three"}));
  const auto& m = c.at("add_abs_value");
  EXPECT_EQ(m.entry_points, std::vector<std::string>{"add_abs_value"});
  ASSERT_EQ(m.tests.size(), 4u);
  // doctests from the add_abs_value statement
  EXPECT_EQ(m.tests[0].expected, "5");
  EXPECT_EQ(m.tests[1].expected, "5");
  EXPECT_EQ(m.tests[2].expected, "3");
  EXPECT_EQ(m.tests[3].expected, "3");
  EXPECT_TRUE(m.solution_note.has_value());
  EXPECT_FALSE(c.at("largest_factor").solution_note.has_value());
  EXPECT_EQ(solution_note_text(c.at("largest_factor")), "");
}

TEST(Catalog, UnknownIdThrows) {
  Catalog c = course();
  EXPECT_THROW(c.at("nope"), UnknownProblem);
  EXPECT_EQ(c.find("nope"), nullptr);
}

TEST(Catalog, RoundTripIsIdentity) {
  for (const auto& [id, m] : course()) {
    EXPECT_EQ(parse_manifest(serialize_manifest(m)), m) << id;
    EXPECT_EQ(serialize_manifest(parse_manifest(serialize_manifest(m))), serialize_manifest(m));
  }
}

TEST(Catalog, SaveThenLoadRoundTrips) {
  Catalog c = course();
  TempDir dir;
  save_catalog(c, dir.path());
  Catalog again = load_catalog(dir.path());
  ASSERT_EQ(again.size(), c.size());
  for (const auto& [id, m] : c) EXPECT_EQ(again.at(id), m);
}

TEST(Catalog, ParseErrorCarriesLine) {
  try {
    parse_manifest("{\n  \"id\": \"x\",\n  oops\n}", "bad.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.file(), "bad.json");
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Catalog, MissingPath) { EXPECT_THROW(load_catalog("/nonexistent/problems"), MissingPath); }

TEST(Catalog, DuplicateIdAcrossFiles) {
  Catalog c = course();
  TempDir dir;
  const auto& m = c.at("add_abs_value");
  dir.write("a.json", serialize_manifest(m));
  dir.write("b.json", serialize_manifest(m));
  EXPECT_THROW(load_catalog(dir.path()), DuplicateId);
}

TEST(Catalog, SingleFileLoad) {
  Catalog c = load_catalog(testing_support::repo_root() / "course" / "problems" / "two_of_three.json");
  EXPECT_EQ(c.size(), 1u);
  EXPECT_TRUE(c.contains("two_of_three"));
}

// Each mutation breaks exactly one invariant and must yield exactly that violation.
TEST(Catalog, MutatedManifestsAreRejected) {
  const ProblemManifest base = course().at("add_abs_value");
  ASSERT_TRUE(validate_manifest(base).empty());

  struct Mutation {
    const char* name;
    std::function<void(ProblemManifest&)> apply;
    std::string violation;
  };
  std::vector<Mutation> mutations = {
      {"bad id", [](ProblemManifest& m) { m.id = "Add-Abs"; }, "id 'Add-Abs' must match [a-z0-9_]+"},
      {"no entry points", [](ProblemManifest& m) { m.entry_points.clear(); }, "entry_points must be non-empty"},
      {"no tests", [](ProblemManifest& m) { m.tests.clear(); }, "tests must be non-empty"},
      {"blank call", [](ProblemManifest& m) { m.tests[2].call = "  "; }, "test 2: call must be non-empty"},
      {"zero timeout", [](ProblemManifest& m) { m.tests[1].timeout_ms = 0; }, "test 1: timeout_ms must be positive"},
      {"undefined entry", [](ProblemManifest& m) { m.entry_points.push_back("helper"); },
       "entry point 'helper' is not defined in scaffold"},
      {"overlap", [](ProblemManifest& m) { m.constraints.forbidden_identifiers.push_back("add"); },
       "identifier 'add' is both forbidden and required"},
      {"no placeholder", [](ProblemManifest& m) { m.runner.command = {"python3", "x.py"}; },
       "runner.command must contain {file} exactly once"},
      {"two placeholders", [](ProblemManifest& m) { m.runner.syntax_check_command.push_back("{file}"); },
       "runner.syntax_check_command must contain {file} exactly once"},
  };

  for (const auto& mut : mutations) {
    ProblemManifest m = base;
    mut.apply(m);
    EXPECT_EQ(validate_manifest(m), std::vector<std::string>{mut.violation}) << mut.name;

    TempDir dir;
    dir.write("p.json", serialize_manifest(m));
    try {
      load_catalog(dir.path());
      ADD_FAILURE() << mut.name << " loaded";
    } catch (const InvalidManifest& e) {
      EXPECT_EQ(e.violations(), std::vector<std::string>{mut.violation});
    }
  }
}

TEST(Catalog, NestedDefIsNotAnEntryPoint) {
  ProblemManifest m = course().at("add_abs_value");
  m.scaffold = "def outer():\n    def add_abs_value(a, b):\n        pass\n";
  EXPECT_EQ(validate_manifest(m), std::vector<std::string>{"entry point 'add_abs_value' is not defined in scaffold"});
}
