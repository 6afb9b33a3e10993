#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bundled/bundle.hpp"
#include "bundled/linked_list.hpp"
#include "bundled/runtime.hpp"
#include "bundled/spin.hpp"
#include "bundled/types.hpp"

namespace bundled {

/// Lazy skip list whose data layer (level 0) is bundled. Index layers keep
/// plain links and only speed up the approach to a key or range.
class BundledSkipList {
 public:
  static constexpr int kMaxLevels = 20;

  struct Node {
    Node(Key k, Value v, int top) noexcept : key{k}, value{v}, top_level{top} {}

    std::size_t release_bundles() noexcept { return bundle.release_all(); }

    const Key key;
    const Value value;
    const int top_level;
    SpinLock lock;
    std::atomic<bool> marked{false};
    std::atomic<bool> fully_linked{false};
    std::array<std::atomic<Node*>, kMaxLevels> next{};
    Bundle<Node> bundle;
  };

  /// `levels` caps node height (1 disables the index layers).
  explicit BundledSkipList(const RuntimeConfig& config = {}, int levels = kMaxLevels);
  ~BundledSkipList();

  BundledSkipList(const BundledSkipList&) = delete;
  BundledSkipList& operator=(const BundledSkipList&) = delete;

  UpdateResult insert(ThreadId tid, Key key, Value value);
  UpdateResult remove(ThreadId tid, Key key);
  bool contains(ThreadId tid, Key key);
  RangeQueryResult range_query(ThreadId tid, Key low, Key high, RangeQueryStats* stats = nullptr);
  RangeQueryResult range_query_at(ThreadId tid, Key low, Key high, Timestamp ts);
  CleanupStats cleanup_pass(ThreadId tid);

  /// Draws a node height index in [0, levels) with p = 1/2 per level.
  int random_level(ThreadId tid);

  [[nodiscard]] Runtime& runtime() noexcept { return rt_; }
  [[nodiscard]] const Runtime& runtime() const noexcept { return rt_; }
  [[nodiscard]] int levels() const noexcept { return levels_; }
  [[nodiscard]] Node* head() const noexcept { return head_; }

  [[nodiscard]] std::vector<KeyValue> items() const;
  [[nodiscard]] std::size_t size() const;
  /// Follows every bundle entry, so removed nodes must still be allocated
  /// or no longer referenced (run cleanup_pass first).
  [[nodiscard]] std::vector<BundleDump> dump_bundles() const;
  [[nodiscard]] std::pair<std::size_t, std::size_t> live_objects() const;
  [[nodiscard]] std::string check_invariants() const;

 private:
  using Level = std::array<Node*, kMaxLevels>;

  int find(Key key, Level& preds, Level& succs) const noexcept;
  /// Data-layer node with the largest key below `key`, via index layers.
  Node* data_pred(Key key) const noexcept;
  std::vector<KeyValue> enter_and_collect(const Node* pred, Key low, Key high, Timestamp ts,
                                          RangeQueryStats* stats) const;
  Node* new_node(Key key, Value value, int top);

  struct alignas(kCacheLine) LevelRng {
    std::mt19937_64 engine;
  };

  Runtime rt_;
  int levels_;
  Node* head_;
  Node* tail_;
  std::unique_ptr<LevelRng[]> rngs_;
  std::mutex cleanup_mutex_;
};

}  // namespace bundled
