#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>
#include <vector>

#include "bundled/citrus_tree.hpp"
#include "bundled/linked_list.hpp"
#include "bundled/skip_list.hpp"

using namespace bundled;

namespace {

const ThreadId t0{0};

std::vector<Key> keys_of(const std::vector<KeyValue>& entries) {
  std::vector<Key> out;
  for (const auto& kv : entries) out.push_back(kv.key);
  return out;
}

std::vector<Key> expected_range(const std::set<Key>& ref, Key low, Key high) {
  return {ref.lower_bound(low), ref.upper_bound(high)};
}

RuntimeConfig small_config(std::size_t threads = 1) {
  RuntimeConfig config;
  config.max_threads = threads;
  return config;
}

// Random single-threaded run checked step by step against std::set.
template <class DS>
void sequential_equivalence(DS& ds, std::size_t ops, Key key_range, std::uint64_t seed) {
  std::set<Key> ref;
  std::mt19937_64 rng{seed};
  std::uniform_int_distribution<int> pick_op{0, 99};
  std::uniform_int_distribution<Key> pick_key{0, key_range - 1};
  std::uniform_int_distribution<Key> pick_len{0, 60};
  Timestamp last_ts = 0;
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < ops; ++i) {
    const int op = pick_op(rng);
    const Key key = pick_key(rng);
    if (op < 35) {
      const auto r = ds.insert(t0, key, key * 3);
      const bool expected = ref.insert(key).second;
      if (r.applied != expected) ++mismatches;
      if (r) {
        if (r.ts <= last_ts) ++mismatches;
        last_ts = r.ts;
      }
    } else if (op < 70) {
      const auto r = ds.remove(t0, key);
      const bool expected = ref.erase(key) == 1;
      if (r.applied != expected) ++mismatches;
      if (r) {
        if (r.ts <= last_ts) ++mismatches;
        last_ts = r.ts;
      }
    } else if (op < 90) {
      if (ds.contains(t0, key) != ref.contains(key)) ++mismatches;
    } else {
      const Key high = std::min(key + pick_len(rng), key_range - 1);
      const auto r = ds.range_query(t0, key, high);
      if (keys_of(r.entries) != expected_range(ref, key, high)) ++mismatches;
      for (const auto& kv : r.entries) {
        if (kv.value != kv.key * 3) ++mismatches;
      }
      if (r.snapshot != last_ts) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
  CHECK(keys_of(ds.items()) == std::vector<Key>(ref.begin(), ref.end()));
  CHECK(ds.size() == ref.size());
  CHECK(ds.check_invariants().empty());
}

// Records the state after each update and replays every snapshot from
// bundles afterwards. Slot 1 stays inside an epoch section throughout so
// that removed nodes are not reclaimed.
template <class DS>
void historical_replay(DS& ds, std::uint64_t seed) {
  EpochGuard pin{ds.runtime().epochs(), ThreadId{1}};
  std::set<Key> ref;
  std::map<Timestamp, std::set<Key>> history{{0, {}}};
  std::mt19937_64 rng{seed};
  std::uniform_int_distribution<Key> pick_key{0, 199};
  for (int i = 0; i < 2000; ++i) {
    const Key key = pick_key(rng);
    if (rng() % 2 == 0) {
      if (auto r = ds.insert(t0, key, key)) {
        ref.insert(key);
        history[r.ts] = ref;
      }
    } else if (auto r = ds.remove(t0, key)) {
      ref.erase(key);
      history[r.ts] = ref;
    }
  }
  std::size_t mismatches = 0;
  for (const auto& [ts, state] : history) {
    const auto r = ds.range_query_at(t0, 20, 180, ts);
    if (keys_of(r.entries) != expected_range(state, 20, 180)) ++mismatches;
  }
  CHECK(history.size() > 100);
  CHECK(mismatches == 0);
}

std::size_t count_entries_at(const std::vector<TreeBundleDump>& dumps, Timestamp ts) {
  std::size_t n = 0;
  for (const auto& d : dumps) {
    for (const auto& dir : d.entries) {
      for (const auto& e : dir) n += e.second == ts ? 1 : 0;
    }
  }
  return n;
}

}  // namespace

TEST_CASE_TEMPLATE("sequential equivalence with a sorted set", DS, BundledLinkedList, BundledSkipList,
                   BundledCitrusTree) {
  DS ds{small_config()};
  sequential_equivalence(ds, 100'000, 2'000, 42);
}

TEST_CASE_TEMPLATE("historical snapshots replay from bundles", DS, BundledLinkedList, BundledSkipList,
                   BundledCitrusTree) {
  DS ds{small_config(2)};
  historical_replay(ds, 7);
}

TEST_CASE_TEMPLATE("sentinel keys and inverted ranges are rejected", DS, BundledLinkedList, BundledSkipList,
                   BundledCitrusTree) {
  DS ds{small_config()};
  CHECK_THROWS_AS(ds.insert(t0, kMinSentinelKey, 0), std::out_of_range);
  CHECK_THROWS_AS(ds.insert(t0, kMaxSentinelKey, 0), std::out_of_range);
  CHECK_THROWS_AS(ds.contains(t0, kMaxSentinelKey), std::out_of_range);
  CHECK_THROWS_AS(ds.range_query(t0, 5, 4), std::invalid_argument);
  CHECK(ds.insert(t0, -5, 1));
  CHECK(ds.insert(t0, kMaxSentinelKey - 1, 2));
  CHECK(keys_of(ds.range_query(t0, kMinSentinelKey + 1, kMaxSentinelKey - 1).entries) ==
        std::vector<Key>{-5, kMaxSentinelKey - 1});
}

TEST_CASE_TEMPLATE("duplicate insert and missing remove leave no trace", DS, BundledLinkedList, BundledSkipList,
                   BundledCitrusTree) {
  DS ds{small_config()};
  CHECK(ds.insert(t0, 1, 10).ts == 1);
  const auto again = ds.insert(t0, 1, 11);
  CHECK_FALSE(again);
  CHECK(again.ts == 0);
  CHECK_FALSE(ds.remove(t0, 2));
  CHECK(ds.runtime().clock().read() == 1);
  CHECK(ds.items() == std::vector<KeyValue>{{1, 10}});
}

TEST_CASE_TEMPLATE("concurrent disjoint updates", DS, BundledLinkedList, BundledSkipList, BundledCitrusTree) {
  constexpr std::size_t kThreads = 4;
  constexpr Key kPer = 500;
  DS ds{small_config(kThreads)};
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      const ThreadId tid{t};
      for (Key i = 0; i < kPer; ++i) ds.insert(tid, i * kThreads + static_cast<Key>(t), i);
      for (Key i = 0; i < kPer; i += 2) ds.remove(tid, i * kThreads + static_cast<Key>(t));
      static_cast<void>(ds.range_query(tid, 0, kPer * kThreads));
    });
  }
  for (auto& t : threads) t.join();
  std::vector<Key> expected;
  for (Key i = 1; i < kPer; i += 2) {
    for (Key t = 0; t < static_cast<Key>(kThreads); ++t) expected.push_back(i * kThreads + t);
  }
  std::sort(expected.begin(), expected.end());
  CHECK(keys_of(ds.items()) == expected);
  CHECK(ds.check_invariants().empty());
  // Every successful update took a distinct timestamp.
  CHECK(ds.runtime().clock().read() == kThreads * (kPer + kPer / 2));
}

TEST_CASE("list: collect takes |result| + 1 bundle dereferences") {
  BundledLinkedList list{small_config()};
  std::mt19937_64 rng{3};
  for (Key k = 0; k < 400; ++k) {
    if (rng() % 2 == 0) list.insert(t0, k, k);
  }
  for (Key low = 0; low < 400; low += 7) {
    for (Key len : {0, 1, 10, 50, 500}) {
      RangeQueryStats stats;
      const auto r = list.range_query(t0, low, low + len, &stats);
      CAPTURE(low);
      CAPTURE(len);
      CHECK(stats.collect_derefs == r.entries.size() + 1);
    }
  }
}

TEST_CASE("list: removed node redirects to the head") {
  BundledLinkedList list{small_config()};
  list.insert(t0, 1, 1);
  list.insert(t0, 2, 2);
  const auto r = list.remove(t0, 1);
  const auto dumps = list.dump_bundles();
  bool found = false;
  for (const auto& d : dumps) {
    if (d.node_key != 1) continue;
    found = true;
    REQUIRE_FALSE(d.entries.empty());
    CHECK(d.entries.front() == std::pair<Key, Timestamp>{kMinSentinelKey, r.ts});
  }
  CHECK(found);
}

TEST_CASE("skip list: level distribution is geometric with p = 1/2") {
  BundledSkipList sl{small_config()};
  constexpr int kSamples = 200'000;
  std::vector<int> counts(BundledSkipList::kMaxLevels, 0);
  for (int i = 0; i < kSamples; ++i) {
    const int level = sl.random_level(t0);
    REQUIRE(level >= 0);
    REQUIRE(level < BundledSkipList::kMaxLevels);
    ++counts[static_cast<std::size_t>(level)];
  }
  // P(level >= k) = 2^-k. Tolerance: 5 standard deviations.
  int at_least = kSamples;
  for (int k = 0; k < 6; ++k) {
    const double p = std::ldexp(1.0, -k);
    const double sd = std::sqrt(kSamples * p * (1 - p));
    CAPTURE(k);
    CHECK(std::abs(at_least - kSamples * p) <= 5 * sd + 1);
    at_least -= counts[static_cast<std::size_t>(k)];
  }
}

TEST_CASE("skip list: a single level behaves identically") {
  BundledSkipList tall{small_config(), BundledSkipList::kMaxLevels};
  BundledSkipList flat{small_config(), 1};
  CHECK(flat.levels() == 1);
  for (int i = 0; i < 1000; ++i) CHECK(flat.random_level(t0) == 0);

  std::mt19937_64 rng{11};
  std::uniform_int_distribution<Key> pick_key{0, 999};
  std::size_t mismatches = 0;
  for (int i = 0; i < 20'000; ++i) {
    const Key key = pick_key(rng);
    switch (rng() % 4) {
      case 0: {
        const auto a = tall.insert(t0, key, key);
        const auto b = flat.insert(t0, key, key);
        mismatches += (a.applied != b.applied || a.ts != b.ts) ? 1 : 0;
        break;
      }
      case 1: {
        const auto a = tall.remove(t0, key);
        const auto b = flat.remove(t0, key);
        mismatches += (a.applied != b.applied || a.ts != b.ts) ? 1 : 0;
        break;
      }
      case 2:
        mismatches += tall.contains(t0, key) != flat.contains(t0, key) ? 1 : 0;
        break;
      default: {
        const auto a = tall.range_query(t0, key, key + 40);
        const auto b = flat.range_query(t0, key, key + 40);
        mismatches += (a.entries != b.entries || a.snapshot != b.snapshot) ? 1 : 0;
      }
    }
  }
  CHECK(mismatches == 0);
  // Drop the history so that no bundle points at a reclaimed node.
  static_cast<void>(tall.cleanup_pass(t0));
  static_cast<void>(flat.cleanup_pass(t0));
  const auto a = tall.dump_bundles();
  const auto b = flat.dump_bundles();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].node_key == b[i].node_key);
    CHECK(a[i].entries == b[i].entries);
  }
  CHECK(flat.check_invariants().empty());
}

TEST_CASE("bst: two-child removal with a distant successor touches six bundles") {
  BundledCitrusTree tree{small_config()};
  for (Key k : {50, 30, 70, 60}) tree.insert(t0, k, k);
  const auto r = tree.remove(t0, 50);
  REQUIRE(r);
  CHECK(count_entries_at(tree.dump_bundles(), r.ts) == 6);
  CHECK(keys_of(tree.items()) == std::vector<Key>{30, 60, 70});
  CHECK(keys_of(tree.range_query_at(t0, 0, 100, r.ts - 1).entries) == std::vector<Key>{30, 50, 60, 70});
  CHECK(keys_of(tree.range_query_at(t0, 0, 100, r.ts).entries) == std::vector<Key>{30, 60, 70});
  CHECK(tree.relocations_started() == 1);
  CHECK(tree.relocations_finished() == 1);
  CHECK(tree.check_invariants().empty());
}

TEST_CASE("bst: two-child removal with the right child as successor touches five bundles") {
  BundledCitrusTree tree{small_config()};
  for (Key k : {50, 30, 70}) tree.insert(t0, k, k);
  const auto r = tree.remove(t0, 50);
  REQUIRE(r);
  CHECK(count_entries_at(tree.dump_bundles(), r.ts) == 5);
  CHECK(keys_of(tree.range_query_at(t0, 0, 100, r.ts - 1).entries) == std::vector<Key>{30, 50, 70});
  CHECK(keys_of(tree.range_query_at(t0, 0, 100, r.ts).entries) == std::vector<Key>{30, 70});
  CHECK(tree.check_invariants().empty());
}

TEST_CASE("bst: range query visits only boundary nodes outside the range") {
  BundledCitrusTree tree{small_config()};
  std::vector<Key> keys(2000);
  for (Key i = 0; i < 2000; ++i) keys[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng{5};
  std::shuffle(keys.begin(), keys.end(), rng);
  for (Key k : keys) tree.insert(t0, k, k);
  const std::size_t height = tree.height();
  CHECK(height < 60);
  for (Key low = 0; low < 2000; low += 37) {
    RangeQueryStats stats;
    const auto r = tree.range_query(t0, low, low + 49, &stats);
    CHECK(r.entries.size() == static_cast<std::size_t>(std::min<Key>(50, 2000 - low)));
    // One path below each boundary at most.
    CHECK(stats.visited_outside.size() <= 2 * height);
    for (Key k : stats.visited_outside) CHECK((k < low || k > low + 49));
  }
}

TEST_CASE("bst: height follows insertion order") {
  BundledCitrusTree sorted{small_config()};
  for (Key k = 0; k < 100; ++k) sorted.insert(t0, k, k);
  CHECK(sorted.height() == 100);

  BundledCitrusTree balanced{small_config()};
  // Midpoints first: a perfectly balanced tree of 127 keys.
  std::vector<std::pair<Key, Key>> work{{0, 126}};
  while (!work.empty()) {
    auto [lo, hi] = work.front();
    work.erase(work.begin());
    if (lo > hi) continue;
    const Key mid = (lo + hi) / 2;
    balanced.insert(t0, mid, mid);
    work.emplace_back(lo, mid - 1);
    work.emplace_back(mid + 1, hi);
  }
  CHECK(balanced.height() == 7);
  CHECK(balanced.size() == 127);
}
