#include <iostream>
#include <string>
#include <vector>

#include "hwhelp/okcli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hwhelp::run_ok(args, std::cout, std::cerr);
}
