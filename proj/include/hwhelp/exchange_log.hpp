#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hwhelp/guard.hpp"

namespace hwhelp {

struct LogRecord {
  std::chrono::system_clock::time_point at{};
  std::string student_digest;
  std::string problem_id;
  std::string origin;
  std::string prompt_hash;
  std::string template_id;
  std::string response;
  GuardVerdict guard;
  bool gated = false;
  std::int64_t latency_ms = 0;
  std::string backend;
  std::optional<std::string> error;
};

/// Salted SHA-256 of a student pseudonym; the raw pseudonym is never logged.
std::string student_digest(std::string_view salt, std::string_view pseudonym);

std::string format_timestamp(std::chrono::system_clock::time_point t);
/// Parses "YYYY-MM-DDTHH:MM:SS[.mmm]Z"; throws Error on malformed input.
std::chrono::system_clock::time_point parse_timestamp(std::string_view s);

nlohmann::json log_record_to_json(const LogRecord& r);
LogRecord log_record_from_json(const nlohmann::json& j);

/// Append-only JSONL sink. Writes are serialized and flushed per record.
class ExchangeLog {
 public:
  explicit ExchangeLog(std::filesystem::path path);

  /// Throws SinkUnavailable when the line cannot be written.
  void write(const LogRecord& record);

  const std::filesystem::path& path() const { return path_; }
  std::uint64_t written() const { return written_.load(); }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::ofstream out_;
  std::atomic<std::uint64_t> written_{0};
};

struct UsageWindow {
  std::optional<std::chrono::system_clock::time_point> from;  // inclusive
  std::optional<std::chrono::system_clock::time_point> to;    // exclusive
  /// Requests for one key further apart than this start a new run.
  std::chrono::minutes run_gap{30};
};

struct UsageStats {
  std::size_t records = 0;
  std::size_t malformed_lines = 0;
  /// "YYYY-MM-DDTHH" (UTC) -> requests in that hour.
  std::map<std::string, std::size_t> requests_per_hour;
  /// run length -> number of runs, over (student_digest, problem_id) keys.
  std::map<std::size_t, std::size_t> repeat_runs;
};

/// One pass over the log. Throws SinkUnavailable when the log cannot be read;
/// a log that does not exist yet reads as empty.
UsageStats usage_stats(const std::filesystem::path& log_path, const UsageWindow& window = {});
nlohmann::json usage_stats_to_json(const UsageStats& s);

}  // namespace hwhelp
