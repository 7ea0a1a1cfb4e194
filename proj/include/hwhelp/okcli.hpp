#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hwhelp {

namespace ok_exit {
inline constexpr int pass = 0;
inline constexpr int fail = 1;
inline constexpr int usage = 2;
inline constexpr int unknown_problem = 3;
inline constexpr int unreachable = 4;
}  // namespace ok_exit

/// Environment lookup; defaults to std::getenv.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

/// Runs the `ok` client. `args` excludes the program name.
int run_ok(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
           const EnvLookup& env = process_env());

}  // namespace hwhelp
