#include "bundled/reclamation.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <cstdlib>

namespace bundled {

namespace {

constexpr std::uint64_t announced_epoch(std::uint64_t word) noexcept { return word >> 1; }
constexpr bool announced_active(std::uint64_t word) noexcept { return (word & 1U) != 0; }

}  // namespace

void GlobalClock::overflow() noexcept {
  std::fputs("bundled: global clock overflow\n", stderr);
  std::abort();
}

void unsatisfied_bundle_dereference(Timestamp ts) noexcept {
  std::fprintf(stderr,
               "bundled: no bundle entry satisfies timestamp %llu "
               "(reclamation threshold violated)\n",
               static_cast<unsigned long long>(ts));
  std::abort();
}

EpochManager::EpochManager(std::size_t max_threads, std::uint32_t advance_interval)
    : max_threads_{max_threads},
      advance_interval_{std::max<std::uint32_t>(advance_interval, 1)},
      slots_{std::make_unique<Slot[]>(max_threads)} {}

EpochManager::~EpochManager() { drain_all(); }

EpochManager::Slot& EpochManager::slot(ThreadId tid) const {
  assert(tid.value < max_threads_);
  return slots_[tid.value];
}

void EpochManager::enter(ThreadId tid) {
  Slot& s = slot(tid);
  assert(!announced_active(s.announce.load(std::memory_order_relaxed)) && "nested epoch enter");
  // Re-read after announcing: an announcement made while the epoch moved on
  // would not hold back objects retired in the epoch we read.
  std::uint64_t e = global_epoch_.load(std::memory_order_seq_cst);
  while (true) {
    s.announce.store((e << 1) | 1U, std::memory_order_seq_cst);
    const std::uint64_t now = global_epoch_.load(std::memory_order_seq_cst);
    if (now == e) break;
    e = now;
  }
  collect(tid);
  if (++s.enters_since_advance >= advance_interval_) {
    s.enters_since_advance = 0;
    try_advance();
  }
}

void EpochManager::exit(ThreadId tid) noexcept {
  Slot& s = slot(tid);
  const std::uint64_t word = s.announce.load(std::memory_order_relaxed);
  assert(announced_active(word) && "epoch exit without enter");
  s.announce.store(word & ~std::uint64_t{1}, std::memory_order_release);
}

bool EpochManager::active(ThreadId tid) const noexcept {
  return announced_active(slot(tid).announce.load(std::memory_order_acquire));
}

void EpochManager::retire(ThreadId tid, Retired object) {
  Slot& s = slot(tid);
  assert(announced_active(s.announce.load(std::memory_order_relaxed)) && "retire outside an epoch section");
  // Tag with the global epoch, not our own announcement: ours may lag by one,
  // and a reader that entered in the newer epoch can still hold the object.
  const std::uint64_t e = global_epoch_.load(std::memory_order_seq_cst);
  LimboBag& bag = s.bags[e % 3];
  if (bag.epoch != e) {
    // Same residue, older epoch: at least three epochs old.
    free_bag(bag);
    bag.epoch = e;
  }
  bag.objects.push_back(object);
}

bool EpochManager::try_advance() noexcept {
  std::uint64_t current = global_epoch_.load(std::memory_order_seq_cst);
  for (std::size_t i = 0; i < max_threads_; ++i) {
    const std::uint64_t word = slots_[i].announce.load(std::memory_order_seq_cst);
    if (announced_active(word) && announced_epoch(word) != current) return false;
  }
  return global_epoch_.compare_exchange_strong(current, current + 1, std::memory_order_seq_cst);
}

void EpochManager::collect(ThreadId tid) {
  Slot& s = slot(tid);
  const std::uint64_t e = global_epoch_.load(std::memory_order_acquire);
  for (auto& bag : s.bags) {
    if (!bag.objects.empty() && bag.epoch + 2 <= e) free_bag(bag);
  }
}

std::size_t EpochManager::limbo_size(ThreadId tid) const noexcept {
  std::size_t n = 0;
  for (const auto& bag : slot(tid).bags) n += bag.objects.size();
  return n;
}

void EpochManager::drain_all() {
  for (std::size_t i = 0; i < max_threads_; ++i) {
    for (auto& bag : slots_[i].bags) free_bag(bag);
  }
}

void EpochManager::free_bag(LimboBag& bag) {
  for (const Retired& r : bag.objects) r.reclaim(r.object, r.context);
  bag.objects.clear();
}

void EpochManager::read_section_enter(ThreadId tid) noexcept {
  slot(tid).read_seq.fetch_add(1, std::memory_order_seq_cst);
  std::atomic_thread_fence(std::memory_order_seq_cst);
}

void EpochManager::read_section_exit(ThreadId tid) noexcept {
  slot(tid).read_seq.fetch_add(1, std::memory_order_release);
}

void EpochManager::wait_for_readers(ThreadId self) const noexcept {
  std::atomic_thread_fence(std::memory_order_seq_cst);
  for (std::size_t i = 0; i < max_threads_; ++i) {
    if (i == self.value) continue;
    const auto& seq = slots_[i].read_seq;
    const std::uint64_t seen = seq.load(std::memory_order_acquire);
    if ((seen & 1U) == 0) continue;
    spin_until([&seq, seen] { return seq.load(std::memory_order_acquire) != seen; });
  }
}

ActiveRqTable::ActiveRqTable(std::size_t max_threads)
    : size_{max_threads}, slots_{std::make_unique<Slot[]>(max_threads)} {}

void ActiveRqTable::set_pending(ThreadId tid) noexcept {
  assert(tid.value < size_);
  slots_[tid.value].value.store(kPending, std::memory_order_seq_cst);
  slots_[tid.value].writes.fetch_add(1, std::memory_order_relaxed);
}

void ActiveRqTable::announce(ThreadId tid, Timestamp ts) noexcept {
  assert(tid.value < size_);
  slots_[tid.value].value.store(ts, std::memory_order_seq_cst);
  slots_[tid.value].writes.fetch_add(1, std::memory_order_relaxed);
}

void ActiveRqTable::clear(ThreadId tid) noexcept {
  assert(tid.value < size_);
  slots_[tid.value].value.store(kInactive, std::memory_order_release);
}

std::uint64_t ActiveRqTable::slot_value(ThreadId tid) const noexcept {
  return slots_[tid.value].value.load(std::memory_order_acquire);
}

Timestamp ActiveRqTable::oldest_active(const GlobalClock& clock, WaitPolicy policy) const noexcept {
  Timestamp oldest = clock.read();
  for (std::size_t i = 0; i < size_; ++i) {
    const auto& value = slots_[i].value;
    std::uint64_t v = value.load(std::memory_order_seq_cst);
    if (v == kPending) {
      spin_until([&] { return (v = value.load(std::memory_order_seq_cst)) != kPending; }, policy);
    }
    if (v != kInactive) oldest = std::min(oldest, v);
  }
  return oldest;
}

std::uint64_t ActiveRqTable::writes() const noexcept {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < size_; ++i) n += slots_[i].writes.load(std::memory_order_relaxed);
  return n;
}

AllocationAudit::Shard& AllocationAudit::shard() noexcept {
  static std::atomic<std::size_t> next_shard{0};
  thread_local const std::size_t index = next_shard.fetch_add(1, std::memory_order_relaxed) % kShards;
  return shards_[index];
}

AllocationAudit::Totals AllocationAudit::totals() const noexcept {
  Totals t;
  for (const auto& s : shards_) {
    t.nodes_allocated += s.nodes_allocated.load(std::memory_order_relaxed);
    t.nodes_freed += s.nodes_freed.load(std::memory_order_relaxed);
    t.entries_allocated += s.entries_allocated.load(std::memory_order_relaxed);
    t.entries_freed += s.entries_freed.load(std::memory_order_relaxed);
  }
  return t;
}

}  // namespace bundled
