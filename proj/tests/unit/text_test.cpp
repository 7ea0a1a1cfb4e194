#include <gtest/gtest.h>

#include "hwhelp/text.hpp"

using namespace hwhelp;

TEST(Text, SplitLinesKeepsTerminators) {
  auto lines = text::split_lines("a\r\nb\nc");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].body, "a");
  EXPECT_EQ(lines[0].full, "a\r\n");
  EXPECT_EQ(lines[1].offset, 3u);
  EXPECT_EQ(lines[2].full, "c");
  EXPECT_TRUE(text::split_lines("").empty());
}

TEST(Text, NormalizeOutput) {
  EXPECT_EQ(text::normalize_output("5  \r\n\n\n"), "5");
  EXPECT_EQ(text::normalize_output("a \nb\t\n"), "a\nb");
  EXPECT_EQ(text::normalize_output(""), "");
}

TEST(Text, ReplaceAllIsSinglePass) {
  EXPECT_EQ(text::replace_all("aaaa", "aa", "a"), "aa");
  EXPECT_EQ(text::replace_all("x%S%y", "%S%", "%S%%S%"), "x%S%%S%y");
  EXPECT_EQ(text::replace_all("abc", "", "z"), "abc");
}

TEST(Text, TopLevelDefName) {
  EXPECT_EQ(text::top_level_def_name("def f(x):"), "f");
  EXPECT_EQ(text::top_level_def_name("def  two_of_three (a, b, c):"), "two_of_three");
  EXPECT_EQ(text::top_level_def_name("    def inner():"), "");
  EXPECT_EQ(text::top_level_def_name("define = 3"), "");
}

TEST(Text, Sha256KnownVector) {
  EXPECT_EQ(text::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(text::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Text, TrimHelpers) {
  EXPECT_EQ(text::trim("  x \t\n"), "x");
  EXPECT_EQ(text::rtrim("  x  "), "  x");
  EXPECT_TRUE(text::is_blank(" \t"));
  EXPECT_TRUE(text::starts_with_ws("\tx"));
  EXPECT_EQ(text::to_lower("LoOks"), "looks");
}
