#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hwhelp/catalog.hpp"

namespace testing_support {

inline std::filesystem::path repo_root() { return HWHELP_TEST_ROOT; }
inline std::filesystem::path fixture(const std::string& name) { return repo_root() / "tests" / "fixtures" / name; }
inline std::filesystem::path golden(const std::string& name) { return repo_root() / "tests" / "golden" / name; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline hwhelp::Catalog course() { return hwhelp::load_catalog(repo_root() / "course" / "problems"); }

// The add_abs_value exercise, filled in.
inline std::string add_abs_source(const std::string& neg_op, const std::string& pos_op) {
  return "from operator import add, sub\n"
         "\n"
         "def add_abs_value(a, b):\n"
         "    \"\"\"Return a + |b| without using abs.\"\"\"\n"
         "    if b < 0:\n"
         "        f = " + neg_op + "\n"
         "    else:\n"
         "        f = " + pos_op + "\n"
         "    return f(a, b)\n";
}

inline std::string correct_add_abs() { return add_abs_source("sub", "add"); }
inline std::string swapped_add_abs() { return add_abs_source("add", "sub"); }

// Reference behaviour of the two fills above, independent of any interpreter.
inline int oracle_add_abs(int a, int b, bool swapped) {
  bool neg = b < 0;
  bool use_sub = swapped ? !neg : neg;
  return use_sub ? a - b : a + b;
}

}  // namespace testing_support
