#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bundled/bundle.hpp"
#include "bundled/runtime.hpp"
#include "bundled/spin.hpp"
#include "bundled/types.hpp"

namespace bundled {

/// Bundle contents of one tree node. Nodes are numbered in discovery order
/// from the root (id 0) following plain links first, then bundle entries.
struct TreeBundleDump {
  static constexpr std::size_t kNil = std::numeric_limits<std::size_t>::max();

  std::size_t id = 0;
  Key key = 0;
  /// Reachable from the root over plain links.
  bool linked = false;
  /// Per direction: (target id or kNil, timestamp), newest first.
  std::array<std::vector<std::pair<std::size_t, Timestamp>>, 2> entries;
};

/// Citrus-style unbalanced BST with bundled child links.
///
/// Traversals for updates, contains and the pre-range phase follow plain
/// links inside read sections; a two-child removal copies the successor into
/// the victim's position and waits for those readers before unlinking the
/// old successor. Range queries and contains that overlap such a relocation
/// fall back to reading bundles from the root.
class BundledCitrusTree {
 public:
  static constexpr int kLeft = 0;
  static constexpr int kRight = 1;

  struct Node {
    Node(Key k, Value v, Node* left, Node* right) noexcept : key{k}, value{v}, child{left, right} {}

    std::size_t release_bundles() noexcept { return bundle[0].release_all() + bundle[1].release_all(); }

    const Key key;
    const Value value;
    SpinLock lock;
    std::atomic<bool> marked{false};
    std::array<std::atomic<Node*>, 2> child;
    /// Bumped whenever the child in that direction becomes nil.
    std::array<std::atomic<std::uint64_t>, 2> tag{};
    std::array<Bundle<Node>, 2> bundle;
  };

  explicit BundledCitrusTree(const RuntimeConfig& config = {});
  ~BundledCitrusTree();

  BundledCitrusTree(const BundledCitrusTree&) = delete;
  BundledCitrusTree& operator=(const BundledCitrusTree&) = delete;

  UpdateResult insert(ThreadId tid, Key key, Value value);
  UpdateResult remove(ThreadId tid, Key key);
  bool contains(ThreadId tid, Key key);
  RangeQueryResult range_query(ThreadId tid, Key low, Key high, RangeQueryStats* stats = nullptr);
  RangeQueryResult range_query_at(ThreadId tid, Key low, Key high, Timestamp ts);
  CleanupStats cleanup_pass(ThreadId tid);

  [[nodiscard]] Runtime& runtime() noexcept { return rt_; }
  [[nodiscard]] const Runtime& runtime() const noexcept { return rt_; }
  [[nodiscard]] Node* root() const noexcept { return root_; }
  [[nodiscard]] Node* nil() const noexcept { return nil_; }

  /// Two-child removals begun and completed so far.
  [[nodiscard]] std::uint64_t relocations_started() const noexcept {
    return relocations_started_.load(std::memory_order_seq_cst);
  }
  [[nodiscard]] std::uint64_t relocations_finished() const noexcept {
    return relocations_finished_.load(std::memory_order_seq_cst);
  }
  /// Contains calls that fell back to a snapshot lookup.
  [[nodiscard]] std::uint64_t contains_fallbacks() const noexcept {
    return contains_fallbacks_.load(std::memory_order_relaxed);
  }

  [[nodiscard]] std::vector<KeyValue> items() const;
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t height() const;
  /// Follows every bundle entry, so removed nodes must still be allocated
  /// or no longer referenced (run cleanup_pass first).
  [[nodiscard]] std::vector<TreeBundleDump> dump_bundles() const;
  [[nodiscard]] std::pair<std::size_t, std::size_t> live_objects() const;
  [[nodiscard]] std::string check_invariants() const;

 private:
  struct Position {
    Node* prev;
    Node* curr;
    int dir;
    std::uint64_t tag;
  };

  /// Plain-link search for `key` inside a read section.
  Position locate(ThreadId tid, Key key);
  bool validate(const Node* prev, std::uint64_t tag, const Node* curr, int dir) const noexcept;
  Node* follow(const Node* node, int dir, Timestamp ts) const noexcept {
    return node->bundle[static_cast<std::size_t>(dir)].dereference(ts, rt_.wait());
  }
  /// Descends bundles from `start` to the first node inside [low, high].
  Node* enter_range(Node* start, Key low, Key high, Timestamp ts, std::size_t& derefs) const;
  void collect(Node* first, Key low, Key high, Timestamp ts, std::vector<KeyValue>& out,
               RangeQueryStats* stats) const;
  bool snapshot_lookup(ThreadId tid, Key key);
  struct Relocated {
    UpdateResult result;
    Node* succ;
  };
  /// Two-child removal with prev and curr locked and validated. Empty when
  /// the successor failed validation.
  std::optional<Relocated> relocate(ThreadId tid, Node* prev, Node* curr, int dir);
  Node* new_node(Key key, Value value, Node* left, Node* right);

  Runtime rt_;
  Node* nil_;
  Node* root_;
  alignas(kCacheLine) std::atomic<std::uint64_t> relocations_started_{0};
  alignas(kCacheLine) std::atomic<std::uint64_t> relocations_finished_{0};
  alignas(kCacheLine) std::atomic<std::uint64_t> contains_fallbacks_{0};
  std::mutex cleanup_mutex_;
};

}  // namespace bundled
