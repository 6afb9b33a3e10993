#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "bundled/clock.hpp"
#include "bundled/spin.hpp"
#include "bundled/types.hpp"

namespace bundled {

inline constexpr std::size_t kCacheLine = 64;

/// An object handed to the epoch manager, freed by `reclaim(object, context)`.
struct Retired {
  void* object;
  void (*reclaim)(void* object, void* context);
  void* context;
};

/// Epoch-based reclamation with per-thread limbo bags.
///
/// An object retired while the global epoch is e is freed once the global
/// epoch reaches e + 2. The epoch advances only when every active
/// thread has announced the current epoch.
///
/// The same slots carry a read-side section counter used by tree removals
/// that must wait for in-flight plain-link traversals (see wait_for_readers).
class EpochManager {
 public:
  EpochManager(std::size_t max_threads, std::uint32_t advance_interval);
  ~EpochManager();

  EpochManager(const EpochManager&) = delete;
  EpochManager& operator=(const EpochManager&) = delete;

  void enter(ThreadId tid);
  void exit(ThreadId tid) noexcept;
  void retire(ThreadId tid, Retired object);
  /// Advances the global epoch if every active thread announced it.
  bool try_advance() noexcept;

  [[nodiscard]] std::uint64_t epoch() const noexcept {
    return global_epoch_.load(std::memory_order_acquire);
  }
  [[nodiscard]] bool active(ThreadId tid) const noexcept;
  [[nodiscard]] std::size_t max_threads() const noexcept { return max_threads_; }
  /// Objects waiting in `tid`'s limbo bags.
  [[nodiscard]] std::size_t limbo_size(ThreadId tid) const noexcept;
  /// Frees whatever `tid` may free at the current epoch. Called on enter.
  void collect(ThreadId tid);
  /// Frees every limbo bag. Requires that no thread is inside a section.
  void drain_all();

  void read_section_enter(ThreadId tid) noexcept;
  void read_section_exit(ThreadId tid) noexcept;
  /// Blocks until every other thread that was inside a read section at call
  /// time has left it.
  void wait_for_readers(ThreadId self) const noexcept;

 private:
  struct LimboBag {
    std::uint64_t epoch = 0;
    std::vector<Retired> objects;
  };

  struct alignas(kCacheLine) Slot {
    // (epoch << 1) | active
    std::atomic<std::uint64_t> announce{0};
    // odd while inside a read section
    std::atomic<std::uint64_t> read_seq{0};
    std::uint32_t enters_since_advance = 0;
    std::array<LimboBag, 3> bags{};
  };

  static void free_bag(LimboBag& bag);
  Slot& slot(ThreadId tid) const;

  std::size_t max_threads_;
  std::uint32_t advance_interval_;
  std::unique_ptr<Slot[]> slots_;
  alignas(kCacheLine) std::atomic<std::uint64_t> global_epoch_{0};
};

/// RAII epoch section.
class EpochGuard {
 public:
  EpochGuard(EpochManager& epochs, ThreadId tid) : epochs_{epochs}, tid_{tid} { epochs_.enter(tid_); }
  ~EpochGuard() { epochs_.exit(tid_); }
  EpochGuard(const EpochGuard&) = delete;
  EpochGuard& operator=(const EpochGuard&) = delete;

 private:
  EpochManager& epochs_;
  ThreadId tid_;
};

class ReadSection {
 public:
  ReadSection(EpochManager& epochs, ThreadId tid) : epochs_{epochs}, tid_{tid} {
    epochs_.read_section_enter(tid_);
  }
  ~ReadSection() { end(); }
  ReadSection(const ReadSection&) = delete;
  ReadSection& operator=(const ReadSection&) = delete;

  void end() noexcept {
    if (open_) {
      epochs_.read_section_exit(tid_);
      open_ = false;
    }
  }

 private:
  EpochManager& epochs_;
  ThreadId tid_;
  bool open_ = true;
};

/// Per-thread announcement of in-flight range-query snapshots.
class ActiveRqTable {
 public:
  static constexpr std::uint64_t kInactive = ~std::uint64_t{0};
  static constexpr std::uint64_t kPending = kInactive - 1;

  explicit ActiveRqTable(std::size_t max_threads);

  /// Must precede the clock read of the range query.
  void set_pending(ThreadId tid) noexcept;
  void announce(ThreadId tid, Timestamp ts) noexcept;
  void clear(ThreadId tid) noexcept;
  [[nodiscard]] std::uint64_t slot_value(ThreadId tid) const noexcept;

  /// Minimum announced snapshot, waiting out pending slots; the current
  /// clock value when no range query is active.
  [[nodiscard]] Timestamp oldest_active(const GlobalClock& clock, WaitPolicy policy = {}) const noexcept;

  /// Number of announce/set_pending writes since construction.
  [[nodiscard]] std::uint64_t writes() const noexcept;

 private:
  struct alignas(kCacheLine) Slot {
    std::atomic<std::uint64_t> value{kInactive};
    std::atomic<std::uint64_t> writes{0};
  };
  std::size_t size_;
  std::unique_ptr<Slot[]> slots_;
};

/// Thread-sharded allocation counters for nodes and bundle entries.
class AllocationAudit {
 public:
  struct Totals {
    std::int64_t nodes_allocated = 0;
    std::int64_t nodes_freed = 0;
    std::int64_t entries_allocated = 0;
    std::int64_t entries_freed = 0;

    [[nodiscard]] std::int64_t live_nodes() const noexcept { return nodes_allocated - nodes_freed; }
    [[nodiscard]] std::int64_t live_entries() const noexcept { return entries_allocated - entries_freed; }
  };

  void nodes_allocated(std::int64_t n = 1) noexcept { shard().nodes_allocated.fetch_add(n, std::memory_order_relaxed); }
  void nodes_freed(std::int64_t n = 1) noexcept { shard().nodes_freed.fetch_add(n, std::memory_order_relaxed); }
  void entries_allocated(std::int64_t n = 1) noexcept { shard().entries_allocated.fetch_add(n, std::memory_order_relaxed); }
  void entries_freed(std::int64_t n = 1) noexcept { shard().entries_freed.fetch_add(n, std::memory_order_relaxed); }

  [[nodiscard]] Totals totals() const noexcept;

 private:
  static constexpr std::size_t kShards = 32;
  struct alignas(kCacheLine) Shard {
    std::atomic<std::int64_t> nodes_allocated{0};
    std::atomic<std::int64_t> nodes_freed{0};
    std::atomic<std::int64_t> entries_allocated{0};
    std::atomic<std::int64_t> entries_freed{0};
  };
  Shard& shard() noexcept;
  std::array<Shard, kShards> shards_{};
};

}  // namespace bundled
