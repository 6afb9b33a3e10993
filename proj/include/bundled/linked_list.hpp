#pragma once

#include <atomic>
#include <cstddef>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "bundled/bundle.hpp"
#include "bundled/runtime.hpp"
#include "bundled/spin.hpp"
#include "bundled/types.hpp"

namespace bundled {

/// Per-node bundle contents keyed by target key, used by debug dumps.
struct BundleDump {
  Key node_key;
  /// (target key, timestamp), newest first.
  std::vector<std::pair<Key, Timestamp>> entries;
};

/// Lazy sorted linked list with bundled next links.
///
/// Inserts lock the predecessor only; removes lock predecessor and victim.
/// Range queries and contains never lock: they reach the range over plain
/// links, then switch to bundles. A removed node's bundle gains an entry
/// pointing back at the head so a reader stranded on it restarts through
/// bundles at its own snapshot.
class BundledLinkedList {
 public:
  struct Node {
    Node(Key k, Value v, Node* successor) noexcept : key{k}, value{v}, next{successor} {}

    std::size_t release_bundles() noexcept { return bundle.release_all(); }

    const Key key;
    const Value value;
    SpinLock lock;
    std::atomic<bool> deleted{false};
    std::atomic<Node*> next;
    Bundle<Node> bundle;
  };

  explicit BundledLinkedList(const RuntimeConfig& config = {});
  ~BundledLinkedList();

  BundledLinkedList(const BundledLinkedList&) = delete;
  BundledLinkedList& operator=(const BundledLinkedList&) = delete;

  UpdateResult insert(ThreadId tid, Key key, Value value);
  UpdateResult remove(ThreadId tid, Key key);
  bool contains(ThreadId tid, Key key);
  RangeQueryResult range_query(ThreadId tid, Key low, Key high, RangeQueryStats* stats = nullptr);

  /// Reads the snapshot at `ts` through bundles from the head. Valid only
  /// while no entry newer-than-needed for `ts` has been reclaimed.
  RangeQueryResult range_query_at(ThreadId tid, Key low, Key high, Timestamp ts);

  /// Retires bundle entries no active or future range query can need.
  CleanupStats cleanup_pass(ThreadId tid);

  [[nodiscard]] Runtime& runtime() noexcept { return rt_; }
  [[nodiscard]] const Runtime& runtime() const noexcept { return rt_; }
  [[nodiscard]] Node* head() const noexcept { return head_; }
  [[nodiscard]] Node* tail() const noexcept { return tail_; }

  static Node* get_next(const Node* node) noexcept { return node->next.load(std::memory_order_acquire); }
  static Node* get_next_from_bundle(const Node* node, Timestamp ts, WaitPolicy policy = {}) noexcept {
    return node->bundle.dereference(ts, policy);
  }
  /// Appends nodes from `first` while key <= high, following bundles at
  /// `ts`. Returns the number of bundle dereferences.
  std::size_t collect_range(const Node* first, Key high, Timestamp ts, std::vector<KeyValue>& out) const;

  // Quiescent inspection.
  [[nodiscard]] std::vector<KeyValue> items() const;
  [[nodiscard]] std::size_t size() const;
  /// Follows every bundle entry, so removed nodes must still be allocated
  /// or no longer referenced (run cleanup_pass first).
  [[nodiscard]] std::vector<BundleDump> dump_bundles() const;
  /// Reachable nodes and their bundle entries, for the allocation audit.
  [[nodiscard]] std::pair<std::size_t, std::size_t> live_objects() const;
  /// Sortedness, link/head agreement and bundle ordering; empty when valid.
  [[nodiscard]] std::string check_invariants() const;

 private:
  std::pair<Node*, Node*> locate(Key key) const noexcept;
  std::vector<KeyValue> enter_and_collect(const Node* pred, Key low, Key high, Timestamp ts,
                                          RangeQueryStats* stats) const;
  Node* new_node(Key key, Value value, Node* next);

  Runtime rt_;
  Node* head_;
  Node* tail_;
  std::mutex cleanup_mutex_;
};

}  // namespace bundled
