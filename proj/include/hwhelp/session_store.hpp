#pragma once

#include <chrono>
#include <compare>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "hwhelp/promptkit.hpp"

namespace hwhelp {

using WallClock = std::function<std::chrono::system_clock::time_point()>;

struct SessionKey {
  std::string student;
  std::string problem_id;

  auto operator<=>(const SessionKey&) const = default;
};

struct HelpSession {
  SessionKey key;
  std::vector<Exchange> exchanges;  // ordered by seq, at most kMaxHistory
  std::chrono::system_clock::time_point updated_at{};
};

/// In-memory per-(student, problem) exchange history with a TTL. All
/// operations are serialized; sessions past the TTL read as empty.
class SessionStore {
 public:
  explicit SessionStore(std::chrono::seconds ttl = std::chrono::hours(48), WallClock clock = {});

  HelpSession get(const SessionKey& key) const;

  /// Inserts by seq and evicts the oldest beyond kMaxHistory.
  HelpSession record(const SessionKey& key, Exchange ex);

  /// Records an exchange with the next seq for the key.
  HelpSession append(const SessionKey& key, std::string code, std::string response);

  std::size_t size() const;
  std::size_t purge_expired();

  void save_snapshot(const std::filesystem::path& path) const;
  void load_snapshot(const std::filesystem::path& path);

 private:
  struct Entry {
    HelpSession session;
    std::int64_t last_seq = 0;
  };

  bool expired(const Entry& e, std::chrono::system_clock::time_point now) const;
  std::chrono::system_clock::time_point now() const;
  HelpSession insert_locked(const SessionKey& key, Exchange ex);

  std::chrono::seconds ttl_;
  WallClock clock_;
  mutable std::mutex mutex_;
  std::map<SessionKey, Entry> sessions_;
};

}  // namespace hwhelp
