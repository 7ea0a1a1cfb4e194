#include <gtest/gtest.h>

#include "hwhelp/codescan.hpp"
#include "hwhelp/error.hpp"
#include "hwhelp/evaluator.hpp"
#include "hwhelp/subprocess.hpp"
#include "support.hpp"

using namespace hwhelp;
using testing_support::course;

namespace {

// Plain Levenshtein over lines, written independently of the library.
double oracle_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  std::size_t longest = std::max(a.size(), b.size());
  return longest == 0 ? 0.0 : d[a.size()][b.size()] / static_cast<double>(longest);
}

const std::vector<std::string> kScaffoldLines = {"def add_abs_value(a, b):", "if b < 0:", "f = ___", "else:",
                                                 "f = ___", "return f(a, b)"};
const std::vector<std::string> kCorrectLines = {"def add_abs_value(a, b):", "if b < 0:", "f = sub", "else:",
                                                "f = add", "return f(a, b)"};

}  // namespace

TEST(Codescan, DefinitionBodyDropsDocstringsAndComments) {
  std::string src =
      "def f(x):\n"
      "    \"\"\"Doc\n"
      "    >>> f(1)\n"
      "    \"\"\"\n"
      "    # note\n"
      "\n"
      "    return x\n"
      "y = 1\n";
  EXPECT_EQ(definition_body(src, "f"), (std::vector<std::string>{"def f(x):", "return x"}));
  EXPECT_FALSE(definition_body(src, "g").has_value());
  EXPECT_EQ(definition_body(course().at("add_abs_value").scaffold, "add_abs_value"), kScaffoldLines);
}

TEST(Codescan, DistanceMatchesOracle) {
  std::vector<std::vector<std::string>> samples = {
      {}, {"a"}, {"a", "b", "c"}, {"b", "c", "d", "e"}, kScaffoldLines, kCorrectLines, {"x", "a", "y"}};
  for (const auto& a : samples)
    for (const auto& b : samples) {
      EXPECT_DOUBLE_EQ(normalized_line_distance(a, b), oracle_distance(a, b));
      EXPECT_DOUBLE_EQ(normalized_line_distance(a, b), normalized_line_distance(b, a));
    }
}

TEST(Codescan, DetectsEditedProblem) {
  Catalog c = course();
  auto r = detect_problem(testing_support::correct_add_abs(), c);
  ASSERT_TRUE(r.chosen.has_value());
  EXPECT_EQ(*r.chosen, "add_abs_value");
  EXPECT_FALSE(r.ambiguous);
  ASSERT_EQ(r.ranked.size(), 3u);
  EXPECT_DOUBLE_EQ(r.ranked[0].score, 1.0 + oracle_distance(kCorrectLines, kScaffoldLines));
  EXPECT_DOUBLE_EQ(r.ranked[1].score, 0.0);
}

TEST(Codescan, MultiProblemFilePrefersTheEditedDefinition) {
  Catalog c = course();
  std::string src = c.at("two_of_three").scaffold + "\n\n" + testing_support::correct_add_abs();
  auto r = detect_problem(src, c);
  EXPECT_EQ(r.chosen.value_or(""), "add_abs_value");
  EXPECT_DOUBLE_EQ(r.ranked[1].score, 1.0);
}

TEST(Codescan, UntouchedScaffoldsAreAmbiguous) {
  Catalog c = course();
  std::string src = c.at("two_of_three").scaffold + "\n" + c.at("largest_factor").scaffold;
  auto r = detect_problem(src, c);
  EXPECT_TRUE(r.ambiguous);
  EXPECT_FALSE(r.chosen.has_value());

  auto hinted = detect_problem(src, c, std::string("largest_factor"));
  EXPECT_EQ(hinted.chosen.value_or(""), "largest_factor");
  EXPECT_THROW(detect_problem(src, c, std::string("nope")), UnknownProblem);
}

TEST(Codescan, NoDefinitionsIsAmbiguous) {
  auto r = detect_problem("print('hi')\n", course());
  EXPECT_TRUE(r.ambiguous);
  for (const auto& s : r.ranked) EXPECT_EQ(s.score, 0.0);
}

TEST(Codescan, ExtractRegionIncludesRequiredImports) {
  Catalog c = course();
  std::string src = "import math\n" + testing_support::correct_add_abs() + "\n\ndef other():\n    return 1\n";
  auto region = extract_region(src, c.at("add_abs_value"));
  EXPECT_EQ(region.problem_id, "add_abs_value");
  // line 1 is `import math`, which brings in nothing required
  EXPECT_EQ(region.line_span, (std::pair<std::size_t, std::size_t>{2, 10}));
  EXPECT_TRUE(region.text.starts_with("from operator import add, sub\n"));
  EXPECT_TRUE(region.text.ends_with("    return f(a, b)"));
  EXPECT_EQ(region.text.find("other"), std::string::npos);
}

TEST(Codescan, ExtractRegionFallsBackToWholeFile) {
  Catalog c = course();
  auto region = extract_region("x = 1\ny = 2\n", c.at("add_abs_value"));
  EXPECT_EQ(region.line_span, (std::pair<std::size_t, std::size_t>{1, 2}));
  EXPECT_EQ(region.text, "x = 1\ny = 2\n");
  auto empty = extract_region("", c.at("add_abs_value"));
  EXPECT_EQ(empty.line_span, (std::pair<std::size_t, std::size_t>{0, 0}));
}

TEST(Codescan, SyntaxCheckReportsLine) {
  const auto runner = course().at("add_abs_value").runner;
  EXPECT_TRUE(syntax_check(testing_support::correct_add_abs(), runner).ok);

  auto before = executed_test_count();
  auto v = syntax_check("def f(:\n    pass\n", runner);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.line, 1);
  ASSERT_TRUE(v.message.has_value());
  EXPECT_NE(v.message->find("SyntaxError"), std::string::npos);
  EXPECT_EQ(executed_test_count(), before);
}

TEST(Codescan, SyntaxCheckDoesNotExecute) {
  const auto runner = course().at("add_abs_value").runner;
  hwhelp::TempDir marker_dir;
  auto marker = marker_dir.path() / "ran";
  std::string src = "open(r'" + marker.string() + "', 'w').write('x')\n";
  EXPECT_TRUE(syntax_check(src, runner).ok);
  EXPECT_FALSE(std::filesystem::exists(marker));
}
