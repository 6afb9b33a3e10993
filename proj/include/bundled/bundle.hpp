#pragma once

#include <atomic>
#include <cassert>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <utility>
#include <vector>

#include "bundled/clock.hpp"
#include "bundled/spin.hpp"

namespace bundled {

[[noreturn]] void unsatisfied_bundle_dereference(Timestamp ts) noexcept;

/// One recorded value of a link: the target node and the timestamp at which
/// the link started pointing to it. `target` is fixed before publication.
template <class Node>
class BundleEntry {
 public:
  BundleEntry(Node* target, Timestamp ts, BundleEntry* next) noexcept
      : target_{target}, ts_{ts}, next_{next} {}

  [[nodiscard]] Node* target() const noexcept { return target_; }
  [[nodiscard]] Timestamp ts() const noexcept { return ts_.load(std::memory_order_acquire); }
  [[nodiscard]] BundleEntry* next() const noexcept { return next_.load(std::memory_order_acquire); }

 private:
  template <class>
  friend class Bundle;

  Node* const target_;
  std::atomic<Timestamp> ts_;
  std::atomic<BundleEntry*> next_;
};

/// History of a single link, newest entry first.
///
/// Invariants: at most one pending entry, always at the head; finalized
/// entries are ordered by non-increasing timestamp (strictly decreasing when
/// updates advance the clock). A bundle created by `init` always holds an
/// entry with timestamp 0.
template <class Node>
class Bundle {
 public:
  using Entry = BundleEntry<Node>;

  Bundle() noexcept = default;
  Bundle(const Bundle&) = delete;
  Bundle& operator=(const Bundle&) = delete;
  ~Bundle() { release_all(); }

  /// Seeds the bundle with a finalized entry at timestamp 0.
  void init(Node* target) {
    assert(head_.load(std::memory_order_relaxed) == nullptr);
    head_.store(new Entry{target, 0, nullptr}, std::memory_order_release);
  }

  /// Installs a pending entry at the head, waiting out any pending entry
  /// that is already there.
  Entry* install_pending(Node* target, WaitPolicy policy = {}) {
    auto* entry = new Entry{target, kPendingTs, nullptr};
    while (true) {
      Entry* expected = head_.load(std::memory_order_acquire);
      if (expected != nullptr) {
        spin_until([expected] { return expected->ts() != kPendingTs; }, policy);
      }
      entry->next_.store(expected, std::memory_order_relaxed);
      if (head_.compare_exchange_weak(expected, entry, std::memory_order_acq_rel,
                                      std::memory_order_relaxed)) {
        return entry;
      }
    }
  }

  /// Stamps the pending head entry with `ts`.
  void finalize(Timestamp ts) noexcept {
    Entry* head = head_.load(std::memory_order_acquire);
    assert(head != nullptr && head->ts() == kPendingTs);
    assert(ts < kPendingTs);
    head->ts_.store(ts, std::memory_order_release);
  }

  /// Returns the target of the newest entry with timestamp <= `ts`, after
  /// waiting for a pending head to be finalized.
  [[nodiscard]] Node* dereference(Timestamp ts, WaitPolicy policy = {}) const noexcept {
    const Entry* entry = head_.load(std::memory_order_acquire);
    if (entry != nullptr && entry->ts() == kPendingTs) {
      spin_until([entry] { return entry->ts() != kPendingTs; }, policy);
    }
    while (entry != nullptr && entry->ts() > ts) entry = entry->next();
    if (entry == nullptr) [[unlikely]] unsatisfied_bundle_dereference(ts);
    return entry->target();
  }

  /// Head target and timestamp without waiting; ts may be kPendingTs.
  [[nodiscard]] std::pair<Node*, Timestamp> newest() const noexcept {
    const Entry* head = head_.load(std::memory_order_acquire);
    if (head == nullptr) return {nullptr, kPendingTs};
    return {head->target(), head->ts()};
  }

  /// Detaches every entry older than the newest one satisfying `threshold`
  /// and hands each to `retire`. The head is never detached. Returns the
  /// number of entries handed off. Only one caller may reclaim a given bundle
  /// at a time.
  template <class Retire>
  std::size_t reclaim(Timestamp threshold, Retire&& retire) {
    Entry* keep = head_.load(std::memory_order_acquire);
    while (keep != nullptr && keep->ts() > threshold) keep = keep->next();
    if (keep == nullptr) return 0;
    Entry* doomed = keep->next_.exchange(nullptr, std::memory_order_acq_rel);
    std::size_t count = 0;
    while (doomed != nullptr) {
      Entry* next = doomed->next();
      retire(doomed);
      doomed = next;
      ++count;
    }
    return count;
  }

  /// Snapshot of (target, ts) pairs, newest first. Not safe against a
  /// concurrent reclaim.
  [[nodiscard]] std::vector<std::pair<Node*, Timestamp>> entries() const {
    std::vector<std::pair<Node*, Timestamp>> out;
    for (const Entry* e = head_.load(std::memory_order_acquire); e != nullptr; e = e->next()) {
      out.emplace_back(e->target(), e->ts());
    }
    return out;
  }

  [[nodiscard]] std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const Entry* e = head_.load(std::memory_order_acquire); e != nullptr; e = e->next()) ++n;
    return n;
  }

  /// Frees the whole chain. Quiescent use only. Returns the entry count.
  std::size_t release_all() noexcept {
    Entry* e = head_.exchange(nullptr, std::memory_order_acq_rel);
    std::size_t n = 0;
    while (e != nullptr) {
      Entry* next = e->next();
      delete e;
      e = next;
      ++n;
    }
    return n;
  }

 private:
  std::atomic<Entry*> head_{nullptr};
};

template <class Node>
struct BundleTarget {
  Bundle<Node>* bundle;
  Node* target;
};

/// Installs one pending entry per target, in order, then takes the update's
/// linearization timestamp from the clock.
template <class Node>
Timestamp prepare_bundles(std::span<const BundleTarget<Node>> targets, GlobalClock& clock,
                          WaitPolicy policy = {}) {
  for (const auto& t : targets) t.bundle->install_pending(t.target, policy);
  return clock.stamp_update();
}

template <class Node>
void finalize_bundles(std::span<const BundleTarget<Node>> targets, Timestamp ts) noexcept {
  for (const auto& t : targets) t.bundle->finalize(ts);
}

}  // namespace bundled
