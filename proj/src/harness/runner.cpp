#include "bundled/harness/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <latch>
#include <memory>
#include <numeric>
#include <random>
#include <thread>
#include <type_traits>

#include "bundled/citrus_tree.hpp"
#include "bundled/cleanup.hpp"
#include "bundled/linked_list.hpp"
#include "bundled/skip_list.hpp"

namespace bundled::harness {

bool RunStats::thresholds_monotonic() const noexcept {
  return std::is_sorted(cleanup_thresholds.begin(), cleanup_thresholds.end());
}

namespace {

struct LoggedRangeQuery {
  Key low;
  Key high;
  Timestamp snapshot;
  std::size_t offset;
  std::size_t count;
};

/// Append-only per-thread buffers, merged after the run.
struct ThreadLog {
  std::vector<UpdateRecord> updates;
  std::vector<ContainsRecord> contains;
  std::vector<LoggedRangeQuery> range_queries;
  std::vector<Key> rq_keys;
  std::uint64_t ops = 0;
  std::uint64_t update_ops = 0;
  std::uint64_t contains_ops = 0;
  std::uint64_t rq_ops = 0;
  std::uint64_t successful_updates = 0;
  std::size_t collect_checked = 0;
  std::size_t collect_mismatches = 0;
  std::uint64_t rq_restarts = 0;
};

template <class DS>
std::unique_ptr<DS> make_structure(const RuntimeConfig& runtime) {
  return std::make_unique<DS>(runtime);
}

template <class DS>
void worker(DS& ds, const WorkloadConfig& config, std::size_t index, const std::atomic<bool>& stop,
            std::latch& start, ThreadLog& log) {
  constexpr bool kIsList = std::is_same_v<DS, BundledLinkedList>;
  const ThreadId tid{index};
  std::seed_seq seq{config.seed, static_cast<std::uint64_t>(index)};
  std::mt19937_64 rng{seq};
  std::uniform_int_distribution<unsigned> pick_op{0, 99};
  std::uniform_int_distribution<Key> pick_key{0, config.key_range - 1};
  std::uniform_int_distribution<Key> pick_low{0, config.key_range - config.rq_size};
  std::bernoulli_distribution pick_insert{0.5};
  auto& rt = ds.runtime();
  // When range queries advance the clock, updates that read the current
  // value may still be linearized before or after the call.
  const Timestamp shared = config.rq_advance ? 1 : 0;
  RangeQueryStats stats;

  start.arrive_and_wait();
  while (!stop.load(std::memory_order_relaxed) &&
         (config.max_ops_per_thread == 0 || log.ops < config.max_ops_per_thread)) {
    const unsigned op = pick_op(rng);
    if (op < config.mix.updates) {
      const Key key = pick_key(rng);
      const bool insert = pick_insert(rng);
      const UpdateResult result = insert ? ds.insert(tid, key, key) : ds.remove(tid, key);
      ++log.update_ops;
      if (result) {
        ++log.successful_updates;
        if (config.validate) log.updates.push_back({key, insert, result.ts, result.order});
      }
    } else if (op < config.mix.updates + config.mix.contains) {
      const Key key = pick_key(rng);
      if (config.validate) {
        const Timestamp c1 = rt.clock().read() - shared;
        const bool found = ds.contains(tid, key);
        const Timestamp c2 = rt.clock().read();
        log.contains.push_back({key, found, c1, c2});
      } else {
        static_cast<void>(ds.contains(tid, key));
      }
      ++log.contains_ops;
    } else {
      const Key low = pick_low(rng);
      const Key high = low + config.rq_size - 1;
      if (config.validate) {
        stats = RangeQueryStats{};
        const RangeQueryResult result = ds.range_query(tid, low, high, &stats);
        log.range_queries.push_back({low, high, result.snapshot, log.rq_keys.size(), result.entries.size()});
        for (const auto& kv : result.entries) log.rq_keys.push_back(kv.key);
        if (stats.restarted_from_root) ++log.rq_restarts;
        if constexpr (kIsList) {
          if (!config.unsafe_rq) {
            ++log.collect_checked;
            if (stats.collect_derefs != result.entries.size() + 1) ++log.collect_mismatches;
          }
        }
      } else {
        static_cast<void>(ds.range_query(tid, low, high));
      }
      ++log.rq_ops;
    }
    ++log.ops;
  }
}

template <class DS>
RunStats run_on(const WorkloadConfig& config, std::size_t trial, const RunOptions& options) {
  RunStats out;
  out.config = config;
  out.trial = trial;

  auto audit = std::make_shared<AllocationAudit>();
  RuntimeConfig runtime;
  // One slot per worker plus one for the cleaner.
  runtime.max_threads = config.threads + 1;
  runtime.clock_mode = config.rq_advance ? ClockMode::range_queries_advance : ClockMode::updates_advance;
  runtime.rq_mode = config.unsafe_rq ? RangeQueryMode::unsafe : RangeQueryMode::linearizable;
  runtime.epoch_advance_interval = config.epoch_advance_ops;
  runtime.track_update_order = config.rq_advance;
  runtime.seed = config.seed;
  runtime.audit = audit;

  OracleInput oracle;
  oracle.key_range = config.key_range;
  std::vector<ThreadLog> logs(config.threads);
  {
    auto ds = make_structure<DS>(runtime);

    // Prefill: a uniformly chosen half of the key range, inserted in random
    // order.
    std::vector<Key> keys(static_cast<std::size_t>(config.key_range));
    std::iota(keys.begin(), keys.end(), Key{0});
    std::mt19937_64 shuffle_rng{config.seed};
    std::shuffle(keys.begin(), keys.end(), shuffle_rng);
    keys.resize(keys.size() / 2);
    for (Key key : keys) {
      const UpdateResult result = ds->insert(ThreadId{0}, key, key);
      oracle.updates.push_back({key, true, result.ts, result.order});
    }
    std::sort(keys.begin(), keys.end());
    const auto present = ds->items();
    out.prefill_size = present.size();
    out.prefill_matches_log =
        std::equal(present.begin(), present.end(), keys.begin(), keys.end(),
                   [](const KeyValue& kv, Key key) { return kv.key == key && kv.value == key; });

    std::atomic<bool> stop{false};
    std::latch start{static_cast<std::ptrdiff_t>(config.threads) + 1};
    std::vector<std::thread> threads;
    threads.reserve(config.threads);
    for (std::size_t i = 0; i < config.threads; ++i) {
      threads.emplace_back([&, i] { worker(*ds, config, i, stop, start, logs[i]); });
    }
    std::unique_ptr<BackgroundCleaner> cleaner;
    if (config.cleanup) {
      const ThreadId cleaner_tid{config.threads};
      cleaner = std::make_unique<BackgroundCleaner>([&ds, cleaner_tid] { return ds->cleanup_pass(cleaner_tid); },
                                                    config.cleanup_interval);
    }

    start.arrive_and_wait();
    const auto began = std::chrono::steady_clock::now();
    if (config.max_ops_per_thread == 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(config.duration_s));
      stop.store(true, std::memory_order_relaxed);
    }
    for (auto& t : threads) t.join();
    out.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - began).count();
    if (cleaner) {
      cleaner->stop();
      out.cleanup_thresholds = cleaner->thresholds();
      out.entries_reclaimed = cleaner->entries_retired();
    }

    out.invariant_errors = ds->check_invariants();
    if constexpr (std::is_same_v<DS, BundledCitrusTree>) out.contains_fallbacks = ds->contains_fallbacks();
  }
  out.audit = audit->totals();

  for (const ThreadLog& log : logs) {
    out.per_thread_ops.push_back(log.ops);
    out.total_ops += log.ops;
    out.updates += log.update_ops;
    out.contains += log.contains_ops;
    out.rqs += log.rq_ops;
    out.successful_updates += log.successful_updates;
    out.collect_checked += log.collect_checked;
    out.collect_mismatches += log.collect_mismatches;
    out.rq_restarts += log.rq_restarts;
  }
  out.throughput_mops = out.elapsed_s > 0.0 ? static_cast<double>(out.total_ops) / out.elapsed_s / 1e6 : 0.0;

  if (config.validate) {
    for (ThreadLog& log : logs) {
      oracle.updates.insert(oracle.updates.end(), log.updates.begin(), log.updates.end());
      oracle.contains.insert(oracle.contains.end(), log.contains.begin(), log.contains.end());
      for (const auto& rq : log.range_queries) {
        const auto first = log.rq_keys.begin() + static_cast<std::ptrdiff_t>(rq.offset);
        oracle.range_queries.push_back(
            {rq.low, rq.high, rq.snapshot, {first, first + static_cast<std::ptrdiff_t>(rq.count)}});
      }
      log = ThreadLog{};
    }
    if (options.keep_logs) out.logs = oracle;
    out.validation = oracle_validate(std::move(oracle));
  }
  return out;
}

}  // namespace

RunStats run_workload(const WorkloadConfig& config, std::size_t trial, RunOptions options) {
  config.check();
  switch (config.ds) {
    case StructureKind::list:
      return run_on<BundledLinkedList>(config, trial, options);
    case StructureKind::skiplist:
      return run_on<BundledSkipList>(config, trial, options);
    case StructureKind::bst:
      return run_on<BundledCitrusTree>(config, trial, options);
  }
  throw std::invalid_argument{"unknown structure"};
}

}  // namespace bundled::harness
