#include "hwhelp/exchange_log.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <vector>

#include "hwhelp/error.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

using nlohmann::json;
using SysClock = std::chrono::system_clock;

std::string student_digest(std::string_view salt, std::string_view pseudonym) {
  std::string material(salt);
  material += '\x1f';
  material += pseudonym;
  return text::sha256_hex(material);
}

std::string format_timestamp(SysClock::time_point t) {
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  int millis = static_cast<int>(ms % 1000);
  if (millis < 0) {
    millis += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
  return buf;
}

SysClock::time_point parse_timestamp(std::string_view s) {
  std::tm tm{};
  int millis = 0;
  std::string str(s);
  int consumed = 0;
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &consumed) != 6) {
    throw Error("malformed timestamp: " + str);
  }
  std::string_view rest = std::string_view(str).substr(static_cast<std::size_t>(consumed));
  if (rest.starts_with('.')) {
    rest.remove_prefix(1);
    int digits = 0;
    while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest.front()))) {
      if (digits < 3) millis = millis * 10 + (rest.front() - '0');
      ++digits;
      rest.remove_prefix(1);
    }
    for (; digits < 3; ++digits) millis *= 10;
  }
  if (rest != "Z") throw Error("timestamp must be UTC: " + str);
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  std::tm want = tm;
  std::time_t secs = timegm(&tm);
  // timegm normalises out-of-range fields; a changed field means the input was invalid
  if (tm.tm_mon != want.tm_mon || tm.tm_mday != want.tm_mday || tm.tm_hour != want.tm_hour ||
      tm.tm_min != want.tm_min || tm.tm_sec != want.tm_sec) {
    throw Error("timestamp out of range: " + str);
  }
  return SysClock::time_point(std::chrono::seconds(secs) + std::chrono::milliseconds(millis));
}

json log_record_to_json(const LogRecord& r) {
  json j = {{"at", format_timestamp(r.at)},
            {"student_digest", r.student_digest},
            {"problem_id", r.problem_id},
            {"origin", r.origin},
            {"prompt_hash", r.prompt_hash},
            {"template_id", r.template_id},
            {"response", r.response},
            {"guard", verdict_to_json(r.guard)},
            {"gated", r.gated},
            {"latency_ms", r.latency_ms},
            {"backend", r.backend}};
  if (r.error) j["error"] = *r.error;
  return j;
}

LogRecord log_record_from_json(const json& j) {
  LogRecord r;
  r.at = parse_timestamp(j.at("at").get<std::string>());
  r.student_digest = j.value("student_digest", "");
  r.problem_id = j.value("problem_id", "");
  r.origin = j.value("origin", "");
  r.prompt_hash = j.value("prompt_hash", "");
  r.template_id = j.value("template_id", "");
  r.response = j.value("response", "");
  if (j.contains("guard")) r.guard = verdict_from_json(j.at("guard"));
  r.gated = j.value("gated", false);
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  r.backend = j.value("backend", "");
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
  return r;
}

ExchangeLog::ExchangeLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
}

void ExchangeLog::write(const LogRecord& record) {
  // dump() escapes control characters, so one record is one physical line.
  std::string line = log_record_to_json(record).dump(-1, ' ', false, json::error_handler_t::replace);
  line += '\n';
  std::lock_guard lock(mutex_);
  if (!out_.is_open()) {
    out_.clear();
    out_.open(path_, std::ios::binary | std::ios::app);
  }
  if (!out_.is_open()) throw SinkUnavailable("cannot open log " + path_.string());
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) {
    out_.close();
    throw SinkUnavailable("cannot write log " + path_.string());
  }
  ++written_;
}

UsageStats usage_stats(const std::filesystem::path& log_path, const UsageWindow& window) {
  UsageStats stats;
  std::error_code ec;
  if (!std::filesystem::exists(log_path, ec)) return stats;
  std::ifstream in(log_path, std::ios::binary);
  if (!in) throw SinkUnavailable("cannot read log " + log_path.string());

  std::map<std::pair<std::string, std::string>, std::vector<SysClock::time_point>> by_key;
  std::string line;
  while (std::getline(in, line)) {
    if (text::is_blank(line)) continue;
    LogRecord r;
    try {
      r = log_record_from_json(json::parse(line));
    } catch (const std::exception&) {
      ++stats.malformed_lines;
      continue;
    }
    if (window.from && r.at < *window.from) continue;
    if (window.to && r.at >= *window.to) continue;
    ++stats.records;
    ++stats.requests_per_hour[format_timestamp(r.at).substr(0, 13)];
    by_key[{r.student_digest, r.problem_id}].push_back(r.at);
  }

  for (auto& [key, times] : by_key) {
    std::sort(times.begin(), times.end());
    std::size_t run = 1;
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (times[i] - times[i - 1] > window.run_gap) {
        ++stats.repeat_runs[run];
        run = 1;
      } else {
        ++run;
      }
    }
    ++stats.repeat_runs[run];
  }
  return stats;
}

json usage_stats_to_json(const UsageStats& s) {
  json hist = json::object();
  for (const auto& [hour, n] : s.requests_per_hour) hist[hour] = n;
  json runs = json::object();
  for (const auto& [len, n] : s.repeat_runs) runs[std::to_string(len)] = n;
  return {{"records", s.records},
          {"malformed_lines", s.malformed_lines},
          {"requests_per_hour", hist},
          {"repeat_runs", runs}};
}

}  // namespace hwhelp
