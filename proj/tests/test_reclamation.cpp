#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "bundled/cleanup.hpp"
#include "bundled/linked_list.hpp"
#include "bundled/reclamation.hpp"
#include "bundled/runtime.hpp"

using namespace bundled;
using namespace std::chrono_literals;

namespace {

struct Counter {
  int freed = 0;
};

Retired tracked(Counter& counter) {
  return Retired{nullptr, [](void*, void* ctx) { ++static_cast<Counter*>(ctx)->freed; }, &counter};
}

}  // namespace

TEST_CASE("epoch: retired objects survive two epochs") {
  EpochManager epochs{2, 1000};
  Counter counter;
  const ThreadId t0{0};
  const ThreadId t1{1};

  epochs.enter(t0);
  epochs.retire(t0, tracked(counter));
  CHECK(epochs.limbo_size(t0) == 1);
  epochs.exit(t0);

  CHECK(epochs.try_advance());  // 0 -> 1
  epochs.enter(t0);
  epochs.exit(t0);
  CHECK(counter.freed == 0);

  CHECK(epochs.try_advance());  // 1 -> 2
  epochs.enter(t0);
  epochs.exit(t0);
  CHECK(counter.freed == 1);
  CHECK(epochs.limbo_size(t0) == 0);
  CHECK(epochs.limbo_size(t1) == 0);
}

TEST_CASE("epoch: an active thread behind the epoch blocks advance") {
  EpochManager epochs{2, 1000};
  Counter counter;
  const ThreadId t0{0};
  const ThreadId t1{1};

  epochs.enter(t1);  // announces epoch 0
  CHECK(epochs.try_advance());  // everybody active is at 0
  CHECK(epochs.epoch() == 1);
  CHECK_FALSE(epochs.try_advance());  // t1 still at 0
  epochs.enter(t0);
  epochs.retire(t0, tracked(counter));
  epochs.exit(t0);
  CHECK(epochs.epoch() == 1);
  epochs.exit(t1);
  CHECK(epochs.try_advance());
  CHECK(epochs.try_advance());
  epochs.enter(t0);
  epochs.exit(t0);
  CHECK(counter.freed == 1);
}

TEST_CASE("epoch: retire tags with the global epoch") {
  EpochManager epochs{2, 1000};
  Counter counter;
  const ThreadId t0{0};
  // Announce epoch 0, then let the epoch move to 1 while still inside.
  epochs.enter(t0);
  CHECK(epochs.try_advance());
  epochs.retire(t0, tracked(counter));  // tagged 1, not 0
  epochs.exit(t0);
  CHECK(epochs.try_advance());  // 2
  epochs.enter(t0);
  epochs.exit(t0);
  CHECK(counter.freed == 0);
  CHECK(epochs.try_advance());  // 3
  epochs.enter(t0);
  epochs.exit(t0);
  CHECK(counter.freed == 1);
}

TEST_CASE("epoch: drain_all frees every bag") {
  Counter counter;
  {
    EpochManager epochs{3, 1000};
    for (std::size_t t = 0; t < 3; ++t) {
      epochs.enter(ThreadId{t});
      epochs.retire(ThreadId{t}, tracked(counter));
      epochs.retire(ThreadId{t}, tracked(counter));
      epochs.exit(ThreadId{t});
    }
    epochs.drain_all();
    CHECK(counter.freed == 6);
    for (std::size_t t = 0; t < 3; ++t) CHECK(epochs.limbo_size(ThreadId{t}) == 0);
  }
  CHECK(counter.freed == 6);
}

TEST_CASE("epoch: destructor frees pending limbo") {
  Counter counter;
  {
    EpochManager epochs{1, 1000};
    epochs.enter(ThreadId{0});
    epochs.retire(ThreadId{0}, tracked(counter));
    epochs.exit(ThreadId{0});
  }
  CHECK(counter.freed == 1);
}

TEST_CASE("read sections: wait_for_readers blocks on an open section") {
  EpochManager epochs{2, 1000};
  epochs.read_section_enter(ThreadId{1});
  std::atomic<bool> passed{false};
  std::thread waiter{[&] {
    epochs.wait_for_readers(ThreadId{0});
    passed.store(true);
  }};
  std::this_thread::sleep_for(50ms);
  CHECK_FALSE(passed.load());
  epochs.read_section_exit(ThreadId{1});
  waiter.join();
  CHECK(passed.load());

  // A section opened after the call is not waited for; own slot ignored.
  epochs.read_section_enter(ThreadId{0});
  epochs.wait_for_readers(ThreadId{0});
  epochs.read_section_exit(ThreadId{0});
}

TEST_CASE("active range queries: oldest snapshot") {
  GlobalClock clock;
  for (int i = 0; i < 10; ++i) clock.advance();
  ActiveRqTable table{3};
  CHECK(table.oldest_active(clock) == 10);
  table.announce(ThreadId{1}, 4);
  table.announce(ThreadId{2}, 7);
  CHECK(table.oldest_active(clock) == 4);
  table.clear(ThreadId{1});
  CHECK(table.oldest_active(clock) == 7);
  CHECK(table.slot_value(ThreadId{1}) == ActiveRqTable::kInactive);
  table.clear(ThreadId{2});
  CHECK(table.oldest_active(clock) == 10);
  CHECK(table.writes() == 2);
}

TEST_CASE("active range queries: a pending slot holds back the threshold") {
  GlobalClock clock;
  clock.advance();
  ActiveRqTable table{2};
  table.set_pending(ThreadId{1});
  std::atomic<bool> done{false};
  Timestamp seen = 0;
  std::thread cleaner{[&] {
    seen = table.oldest_active(clock, WaitPolicy{0});
    done.store(true);
  }};
  std::this_thread::sleep_for(50ms);
  CHECK_FALSE(done.load());
  for (int i = 0; i < 5; ++i) clock.advance();
  table.announce(ThreadId{1}, 1);
  cleaner.join();
  CHECK(seen == 1);
}

TEST_CASE("snapshot guard announces and clears") {
  RuntimeConfig config;
  config.max_threads = 2;
  Runtime rt{config};
  rt.clock().advance();
  rt.clock().advance();
  {
    SnapshotGuard guard{rt, ThreadId{1}};
    CHECK(guard.ts() == 2);
    CHECK(rt.active_rqs().slot_value(ThreadId{1}) == 2);
    rt.clock().advance();
    CHECK(rt.retirement_threshold() == 2);
  }
  CHECK(rt.active_rqs().slot_value(ThreadId{1}) == ActiveRqTable::kInactive);
  CHECK(rt.retirement_threshold() == 3);
}

TEST_CASE("cleanup: golden script list keeps only what the threshold needs") {
  auto audit = std::make_shared<AllocationAudit>();
  {
    RuntimeConfig config;
    config.max_threads = 2;
    config.audit = audit;
    BundledLinkedList list{config};
    const ThreadId t{0};
    list.insert(t, 20, 20);
    list.insert(t, 30, 30);
    list.insert(t, 10, 10);
    list.remove(t, 20);

    // A range query pinned at ts 2 keeps the entries it needs.
    {
      SnapshotGuard pin{list.runtime(), ThreadId{1}, 2};
      const auto stats = list.cleanup_pass(t);
      CHECK(stats.threshold == 2);
      // head keeps (3->10),(1->20); drops (0->tail). Node 10 keeps both.
      CHECK(stats.entries_retired == 1);
      const auto r = list.range_query_at(ThreadId{1}, 0, 100, 2);
      std::vector<Key> keys;
      for (const auto& kv : r.entries) keys.push_back(kv.key);
      CHECK(keys == std::vector<Key>{20, 30});
    }
    const auto stats = list.cleanup_pass(t);
    CHECK(stats.threshold == 4);
    // head: drops (1->20); node 10: drops (3->20).
    CHECK(stats.entries_retired == 2);
    for (const auto& dump : list.dump_bundles()) {
      if (dump.node_key == 10 || dump.node_key == 30) CHECK(dump.entries.size() == 1);
    }
    CHECK(list.check_invariants().empty());
  }
  const auto totals = audit->totals();
  CHECK(totals.live_nodes() == 0);
  CHECK(totals.live_entries() == 0);
  CHECK(totals.nodes_allocated > 0);
}

TEST_CASE("cleanup: background cleaner records non-decreasing thresholds") {
  RuntimeConfig config;
  config.max_threads = 2;
  BundledLinkedList list{config};
  BackgroundCleaner cleaner{[&] { return list.cleanup_pass(ThreadId{1}); }, 1ms};
  for (Key k = 0; k < 2000; ++k) {
    list.insert(ThreadId{0}, k % 50, k);
    list.remove(ThreadId{0}, (k + 25) % 50);
  }
  std::this_thread::sleep_for(20ms);
  cleaner.stop();
  const auto thresholds = cleaner.thresholds();
  CHECK_FALSE(thresholds.empty());
  CHECK(std::is_sorted(thresholds.begin(), thresholds.end()));
  CHECK(cleaner.entries_retired() > 0);
}

TEST_CASE("audit: totals balance after teardown") {
  auto audit = std::make_shared<AllocationAudit>();
  {
    RuntimeConfig config;
    config.max_threads = 1;
    config.audit = audit;
    BundledLinkedList list{config};
    for (Key k = 0; k < 500; ++k) list.insert(ThreadId{0}, k, k);
    for (Key k = 0; k < 500; k += 2) list.remove(ThreadId{0}, k);
    const auto live = list.live_objects();
    const auto t = audit->totals();
    // Removed nodes sit in limbo, so the audit sees at least the reachable set.
    CHECK(t.live_nodes() >= static_cast<std::int64_t>(live.first));
  }
  const auto t = audit->totals();
  CHECK(t.live_nodes() == 0);
  CHECK(t.live_entries() == 0);
}
