#include "hwhelp/session_store.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "hwhelp/error.hpp"

namespace hwhelp {

using nlohmann::json;

SessionStore::SessionStore(std::chrono::seconds ttl, WallClock clock) : ttl_(ttl), clock_(std::move(clock)) {}

std::chrono::system_clock::time_point SessionStore::now() const {
  // millisecond resolution so snapshots round-trip exactly
  return std::chrono::floor<std::chrono::milliseconds>(clock_ ? clock_() : std::chrono::system_clock::now());
}

bool SessionStore::expired(const Entry& e, std::chrono::system_clock::time_point t) const {
  return t - e.session.updated_at > ttl_;
}

HelpSession SessionStore::get(const SessionKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(key);
  if (it == sessions_.end() || expired(it->second, now())) return HelpSession{key, {}, {}};
  return it->second.session;
}

HelpSession SessionStore::insert_locked(const SessionKey& key, Exchange ex) {
  auto t = now();
  auto& entry = sessions_[key];
  if (expired(entry, t)) {
    entry.session.exchanges.clear();
    entry.last_seq = 0;
    entry.session.key = key;
  }
  auto& xs = entry.session.exchanges;
  auto pos = std::lower_bound(xs.begin(), xs.end(), ex.seq,
                              [](const Exchange& e, std::int64_t seq) { return e.seq < seq; });
  if (pos != xs.end() && pos->seq == ex.seq) {
    *pos = std::move(ex);
  } else {
    entry.last_seq = std::max(entry.last_seq, ex.seq);
    xs.insert(pos, std::move(ex));
  }
  while (xs.size() > kMaxHistory) xs.erase(xs.begin());
  entry.session.updated_at = t;
  return entry.session;
}

HelpSession SessionStore::record(const SessionKey& key, Exchange ex) {
  std::lock_guard lock(mutex_);
  return insert_locked(key, std::move(ex));
}

HelpSession SessionStore::append(const SessionKey& key, std::string code, std::string response) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(key);
  std::int64_t seq = 1;
  if (it != sessions_.end() && !expired(it->second, now())) seq = it->second.last_seq + 1;
  return insert_locked(key, Exchange{std::move(code), std::move(response), now(), seq});
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SessionStore::purge_expired() {
  std::lock_guard lock(mutex_);
  auto t = now();
  return std::erase_if(sessions_, [&](const auto& kv) { return expired(kv.second, t); });
}

void SessionStore::save_snapshot(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  json sessions = json::array();
  for (const auto& [key, entry] : sessions_) {
    json xs = json::array();
    for (const auto& ex : entry.session.exchanges) xs.push_back(exchange_to_json(ex));
    sessions.push_back({{"student", key.student},
                        {"problem_id", key.problem_id},
                        {"last_seq", entry.last_seq},
                        {"updated_at_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                              entry.session.updated_at.time_since_epoch())
                                              .count()},
                        {"exchanges", xs}});
  }
  std::ofstream out(path, std::ios::binary);
  out << json{{"sessions", sessions}}.dump() << '\n';
  if (!out) throw Error("cannot write session snapshot " + path.string());
}

void SessionStore::load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPath(path.string());
  json j = json::parse(in);
  std::lock_guard lock(mutex_);
  sessions_.clear();
  for (const auto& s : j.at("sessions")) {
    SessionKey key{s.at("student").get<std::string>(), s.at("problem_id").get<std::string>()};
    Entry e;
    e.session.key = key;
    e.last_seq = s.value("last_seq", std::int64_t{0});
    e.session.updated_at =
        std::chrono::system_clock::time_point(std::chrono::milliseconds(s.value("updated_at_ms", std::int64_t{0})));
    for (const auto& x : s.at("exchanges")) e.session.exchanges.push_back(exchange_from_json(x));
    sessions_[key] = std::move(e);
  }
}

}  // namespace hwhelp
