#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include "bundled/bundle.hpp"
#include "bundled/clock.hpp"
#include "bundled/reclamation.hpp"
#include "bundled/spin.hpp"
#include "bundled/types.hpp"

namespace bundled {

enum class RangeQueryMode : std::uint8_t {
  linearizable,
  /// Plain-link traversal with no bundles. Not linearizable; a negative
  /// control for validation.
  unsafe,
};

struct RuntimeConfig {
  std::size_t max_threads = 64;
  WaitPolicy wait{};
  ClockMode clock_mode = ClockMode::updates_advance;
  RangeQueryMode rq_mode = RangeQueryMode::linearizable;
  /// Epoch sections a thread enters between attempts to advance the epoch.
  std::uint32_t epoch_advance_interval = 32;
  /// Stamp each successful update with a global sequence number taken right
  /// after its timestamp (orders updates sharing a timestamp when range
  /// queries advance the clock).
  bool track_update_order = false;
  /// Skip list level generator seed.
  std::uint64_t seed = 1;
  /// Shared so that the totals outlive the structure; created when null.
  std::shared_ptr<AllocationAudit> audit;
};

/// State shared by every operation on one data structure instance: the
/// clock, reclamation, the active range-query table, and counters.
class Runtime {
 public:
  explicit Runtime(const RuntimeConfig& config)
      : audit_{config.audit ? config.audit : std::make_shared<AllocationAudit>()},
        config_{config},
        clock_{config.clock_mode},
        epochs_{config.max_threads, config.epoch_advance_interval},
        active_rqs_{config.max_threads} {}

  ~Runtime() { epochs_.drain_all(); }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  [[nodiscard]] const RuntimeConfig& config() const noexcept { return config_; }
  [[nodiscard]] WaitPolicy wait() const noexcept { return config_.wait; }
  [[nodiscard]] GlobalClock& clock() noexcept { return clock_; }
  [[nodiscard]] const GlobalClock& clock() const noexcept { return clock_; }
  [[nodiscard]] EpochManager& epochs() noexcept { return epochs_; }
  [[nodiscard]] ActiveRqTable& active_rqs() noexcept { return active_rqs_; }
  [[nodiscard]] const ActiveRqTable& active_rqs() const noexcept { return active_rqs_; }
  [[nodiscard]] AllocationAudit& audit() noexcept { return *audit_; }
  [[nodiscard]] const AllocationAudit& audit() const noexcept { return *audit_; }
  [[nodiscard]] bool unsafe_range_queries() const noexcept {
    return config_.rq_mode == RangeQueryMode::unsafe;
  }

  struct UpdateStamp {
    Timestamp ts;
    std::uint64_t order;
  };

  /// Installs the pending entries and takes the update's timestamp, then its
  /// order stamp (zero unless tracked). Both precede any plain-link change,
  /// so an update that depends on another's effect gets the later stamp.
  template <class Node>
  UpdateStamp prepare(std::span<const BundleTarget<Node>> targets) {
    const Timestamp ts = prepare_bundles<Node>(targets, clock_, config_.wait);
    const std::uint64_t order =
        config_.track_update_order ? order_.fetch_add(1, std::memory_order_seq_cst) + 1 : 0;
    return {ts, order};
  }

  [[nodiscard]] Timestamp retirement_threshold() const noexcept {
    return active_rqs_.oldest_active(clock_, config_.wait);
  }

  template <class Node>
  void retire_entry(ThreadId tid, BundleEntry<Node>* entry) {
    epochs_.retire(tid, Retired{entry, &reclaim_entry<Node>, audit_.get()});
  }

  /// `Node` must expose `release_bundles()` returning the entries it freed.
  template <class Node>
  void retire_node(ThreadId tid, Node* node) {
    epochs_.retire(tid, Retired{node, &reclaim_node<Node>, audit_.get()});
  }

  template <class Node>
  void free_node_now(Node* node) noexcept {
    reclaim_node<Node>(node, audit_.get());
  }

 private:
  template <class Node>
  static void reclaim_entry(void* object, void* context) {
    delete static_cast<BundleEntry<Node>*>(object);
    static_cast<AllocationAudit*>(context)->entries_freed();
  }

  template <class Node>
  static void reclaim_node(void* object, void* context) {
    auto* node = static_cast<Node*>(object);
    const auto entries = static_cast<std::int64_t>(node->release_bundles());
    delete node;
    auto* audit = static_cast<AllocationAudit*>(context);
    audit->nodes_freed();
    audit->entries_freed(entries);
  }

  std::shared_ptr<AllocationAudit> audit_;
  RuntimeConfig config_;
  GlobalClock clock_;
  EpochManager epochs_;
  ActiveRqTable active_rqs_;
  alignas(kCacheLine) std::atomic<std::uint64_t> order_{0};
};

/// Brackets a range query's snapshot: the slot goes pending before the clock
/// is read, so a concurrent cleanup cannot miss the snapshot.
class SnapshotGuard {
 public:
  SnapshotGuard(Runtime& rt, ThreadId tid) : rt_{rt}, tid_{tid} {
    rt_.active_rqs().set_pending(tid_);
    ts_ = rt_.clock().stamp_snapshot();
    rt_.active_rqs().announce(tid_, ts_);
  }
  /// Pins an explicit snapshot (historical replay).
  SnapshotGuard(Runtime& rt, ThreadId tid, Timestamp ts) : rt_{rt}, tid_{tid}, ts_{ts} {
    rt_.active_rqs().announce(tid_, ts_);
  }
  ~SnapshotGuard() { rt_.active_rqs().clear(tid_); }
  SnapshotGuard(const SnapshotGuard&) = delete;
  SnapshotGuard& operator=(const SnapshotGuard&) = delete;

  [[nodiscard]] Timestamp ts() const noexcept { return ts_; }

 private:
  Runtime& rt_;
  ThreadId tid_;
  Timestamp ts_ = 0;
};

struct CleanupStats {
  Timestamp threshold = 0;
  std::size_t bundles_visited = 0;
  std::size_t entries_retired = 0;
};

}  // namespace bundled
