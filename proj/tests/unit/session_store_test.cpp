#include <gtest/gtest.h>

#include <thread>

#include "hwhelp/session_store.hpp"
#include "hwhelp/subprocess.hpp"

using namespace hwhelp;
using namespace std::chrono_literals;

namespace {

struct FakeClock {
  std::shared_ptr<std::chrono::system_clock::time_point> now =
      std::make_shared<std::chrono::system_clock::time_point>(std::chrono::sys_days{std::chrono::year{2025} / 3 / 1});
  WallClock fn() const {
    return [n = now] { return *n; };
  }
  void advance(std::chrono::seconds s) const { *now += s; }
};

}  // namespace

TEST(SessionStore, KeepsLatestThree) {
  SessionStore store;
  SessionKey key{"s1", "add_abs_value"};
  for (int i = 1; i <= 5; ++i) store.append(key, "code" + std::to_string(i), "reply" + std::to_string(i));
  auto s = store.get(key);
  ASSERT_EQ(s.exchanges.size(), 3u);
  EXPECT_EQ(s.exchanges[0].seq, 3);
  EXPECT_EQ(s.exchanges[0].code_snapshot, "code3");
  EXPECT_EQ(s.exchanges[2].assistant_response, "reply5");
  EXPECT_TRUE(store.get({"s1", "other"}).exchanges.empty());
  EXPECT_TRUE(store.get({"s2", "add_abs_value"}).exchanges.empty());
}

TEST(SessionStore, RecordOrdersAndReplacesBySeq) {
  SessionStore store;
  SessionKey key{"s", "p"};
  store.record(key, {"c5", "r5", {}, 5});
  store.record(key, {"c2", "r2", {}, 2});
  store.record(key, {"c9", "r9", {}, 9});
  store.record(key, {"c5b", "r5b", {}, 5});
  auto s = store.get(key);
  ASSERT_EQ(s.exchanges.size(), 3u);
  EXPECT_EQ(s.exchanges[1].code_snapshot, "c5b");
  store.record(key, {"c1", "r1", {}, 1});  // older than everything kept
  EXPECT_EQ(store.get(key).exchanges.front().seq, 2);
  store.record(key, {"c10", "r10", {}, 10});
  EXPECT_EQ(store.get(key).exchanges.front().seq, 5);
}

TEST(SessionStore, ExpiresAfterTtl) {
  FakeClock clock;
  SessionStore store(48h, clock.fn());
  SessionKey key{"s", "p"};
  store.append(key, "a", "b");
  clock.advance(48h);
  EXPECT_EQ(store.get(key).exchanges.size(), 1u);
  clock.advance(1s);
  EXPECT_TRUE(store.get(key).exchanges.empty());
  auto fresh = store.append(key, "c", "d");
  ASSERT_EQ(fresh.exchanges.size(), 1u);
  EXPECT_EQ(fresh.exchanges[0].seq, 1);
}

TEST(SessionStore, PurgeExpired) {
  FakeClock clock;
  SessionStore store(1h, clock.fn());
  store.append({"a", "p"}, "x", "y");
  clock.advance(2h);
  store.append({"b", "p"}, "x", "y");
  EXPECT_EQ(store.purge_expired(), 1u);
  EXPECT_EQ(store.size(), 1u);
}

TEST(SessionStore, ConcurrentAppendsKeepTheCap) {
  SessionStore store;
  SessionKey shared{"s", "p"};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        store.append(shared, "c", "r");
        store.append({"own" + std::to_string(t), "p"}, "c", "r");
      }
    });
  }
  for (auto& th : threads) th.join();
  auto s = store.get(shared);
  ASSERT_EQ(s.exchanges.size(), 3u);
  EXPECT_EQ(s.exchanges[0].seq, 398);
  EXPECT_EQ(s.exchanges[2].seq, 400);
  EXPECT_EQ(store.size(), 9u);
}

TEST(SessionStore, SnapshotRoundTrip) {
  TempDir dir;
  SessionStore store;
  store.append({"s", "p"}, "one", "1");
  store.append({"s", "p"}, "two", "2");
  store.append({"t", "q"}, "three", "3");
  store.save_snapshot(dir.path() / "snap.json");

  SessionStore again;
  again.load_snapshot(dir.path() / "snap.json");
  EXPECT_EQ(again.get({"s", "p"}).exchanges, store.get({"s", "p"}).exchanges);
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(again.append({"s", "p"}, "four", "4").exchanges.back().seq, 3);
}
