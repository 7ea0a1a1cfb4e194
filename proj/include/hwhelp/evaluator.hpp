#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hwhelp/catalog.hpp"

namespace hwhelp {

inline constexpr std::size_t kTestOutputLimit = 64 * 1024;

enum class TestStatus { pass, fail, error, timeout };

const char* to_string(TestStatus s);
TestStatus test_status_from_string(std::string_view s);

struct TestOutcome {
  std::size_t test_index = 0;
  TestStatus status = TestStatus::error;
  std::string call;
  std::string actual;
  std::string expected;

  bool operator==(const TestOutcome&) const = default;
};

struct EvalReport {
  std::string problem_id;
  std::vector<TestOutcome> outcomes;
  bool syntax_ok = true;
  bool all_passed = false;
  std::int64_t duration_ms = 0;
  /// Set when syntax_ok is false.
  std::optional<int> syntax_line;
  std::optional<std::string> syntax_message;
};

/// Syntax check, then every doctest in its own subprocess. Throws RunnerUnavailable.
EvalReport run_tests(const std::string& source, const ProblemManifest& m);

/// True when a help request may be sent, i.e. the code is not already passing.
constexpr bool gate_help(const EvalReport& report) { return !report.all_passed; }

/// Header line plus one block per non-passing test. Byte-stable for fixed input.
std::string format_report(const EvalReport& report);

/// Number of test cases executed by this process so far (instrumentation).
std::uint64_t executed_test_count();

nlohmann::json report_to_json(const EvalReport& r);
/// Recomputes all_passed from the other fields so a client cannot assert it inconsistently.
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace hwhelp
