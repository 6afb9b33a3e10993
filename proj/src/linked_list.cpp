#include "bundled/linked_list.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

namespace bundled {

using Node = BundledLinkedList::Node;

BundledLinkedList::BundledLinkedList(const RuntimeConfig& config) : rt_{config} {
  tail_ = new_node(kMaxSentinelKey, 0, nullptr);
  head_ = new_node(kMinSentinelKey, 0, tail_);
  head_->bundle.init(tail_);
  rt_.audit().entries_allocated();
}

BundledLinkedList::~BundledLinkedList() {
  Node* node = head_;
  while (node != nullptr) {
    Node* next = get_next(node);
    rt_.free_node_now(node);
    node = next;
  }
}

Node* BundledLinkedList::new_node(Key key, Value value, Node* next) {
  rt_.audit().nodes_allocated();
  return new Node{key, value, next};
}

std::pair<Node*, Node*> BundledLinkedList::locate(Key key) const noexcept {
  Node* pred = head_;
  Node* curr = get_next(pred);
  while (curr->key < key) {
    pred = curr;
    curr = get_next(curr);
  }
  return {pred, curr};
}

namespace {

bool validate(const Node* pred, const Node* curr) noexcept {
  return !pred->deleted.load(std::memory_order_acquire) &&
         !curr->deleted.load(std::memory_order_acquire) &&
         pred->next.load(std::memory_order_acquire) == curr;
}

}  // namespace

UpdateResult BundledLinkedList::insert(ThreadId tid, Key key, Value value) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  while (true) {
    auto [pred, curr] = locate(key);
    std::lock_guard pred_lock{pred->lock};
    if (!validate(pred, curr)) continue;
    if (curr->key == key) return {};

    Node* node = new_node(key, value, curr);
    const std::array<BundleTarget<Node>, 2> targets{{{&node->bundle, curr}, {&pred->bundle, node}}};
    rt_.audit().entries_allocated(targets.size());
    const auto [ts, order] = rt_.prepare<Node>(targets);
    pred->next.store(node, std::memory_order_release);
    finalize_bundles<Node>(targets, ts);
    return {true, ts, order};
  }
}

UpdateResult BundledLinkedList::remove(ThreadId tid, Key key) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  while (true) {
    auto [pred, curr] = locate(key);
    std::lock_guard pred_lock{pred->lock};
    std::lock_guard curr_lock{curr->lock};
    if (!validate(pred, curr)) continue;
    if (curr->key != key) return {};

    Node* successor = get_next(curr);
    const std::array<BundleTarget<Node>, 2> targets{{{&pred->bundle, successor}, {&curr->bundle, head_}}};
    rt_.audit().entries_allocated(targets.size());
    const auto [ts, order] = rt_.prepare<Node>(targets);
    curr->deleted.store(true, std::memory_order_release);
    pred->next.store(successor, std::memory_order_release);
    finalize_bundles<Node>(targets, ts);
    rt_.retire_node(tid, curr);
    return {true, ts, order};
  }
}

bool BundledLinkedList::contains(ThreadId tid, Key key) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  const Node* node = locate(key).first;
  do {
    node = get_next_from_bundle(node, kContainsTs, rt_.wait());
  } while (node->key < key);
  return node->key == key;
}

std::size_t BundledLinkedList::collect_range(const Node* first, Key high, Timestamp ts,
                                             std::vector<KeyValue>& out) const {
  std::size_t derefs = 0;
  for (const Node* node = first; node->key <= high; ++derefs) {
    out.push_back({node->key, node->value});
    node = get_next_from_bundle(node, ts, rt_.wait());
  }
  return derefs;
}

std::vector<KeyValue> BundledLinkedList::enter_and_collect(const Node* pred, Key low, Key high,
                                                           Timestamp ts, RangeQueryStats* stats) const {
  std::size_t enter_derefs = 0;
  const Node* node = pred;
  do {
    node = get_next_from_bundle(node, ts, rt_.wait());
    ++enter_derefs;
  } while (node->key < low);

  std::vector<KeyValue> out;
  const std::size_t collect_derefs = collect_range(node, high, ts, out);
  if (stats != nullptr) {
    stats->enter_derefs = enter_derefs - 1;
    stats->collect_derefs = collect_derefs + 1;
  }
  return out;
}

RangeQueryResult BundledLinkedList::range_query(ThreadId tid, Key low, Key high, RangeQueryStats* stats) {
  check_range(low, high);
  EpochGuard epoch{rt_.epochs(), tid};
  const Node* pred = locate(low).first;

  if (rt_.unsafe_range_queries()) {
    RangeQueryResult result{rt_.clock().read(), {}};
    for (const Node* node = get_next(pred); node->key <= high; node = get_next(node)) {
      result.entries.push_back({node->key, node->value});
    }
    return result;
  }

  SnapshotGuard snapshot{rt_, tid};
  return {snapshot.ts(), enter_and_collect(pred, low, high, snapshot.ts(), stats)};
}

RangeQueryResult BundledLinkedList::range_query_at(ThreadId tid, Key low, Key high, Timestamp ts) {
  check_range(low, high);
  EpochGuard epoch{rt_.epochs(), tid};
  SnapshotGuard snapshot{rt_, tid, ts};
  return {ts, enter_and_collect(head_, low, high, ts, nullptr)};
}

CleanupStats BundledLinkedList::cleanup_pass(ThreadId tid) {
  std::lock_guard serial{cleanup_mutex_};
  EpochGuard epoch{rt_.epochs(), tid};
  CleanupStats stats;
  stats.threshold = rt_.retirement_threshold();
  for (Node* node = head_; node != tail_; node = get_next(node)) {
    stats.entries_retired += node->bundle.reclaim(
        stats.threshold, [&](BundleEntry<Node>* entry) { rt_.retire_entry(tid, entry); });
    ++stats.bundles_visited;
  }
  return stats;
}

std::vector<KeyValue> BundledLinkedList::items() const {
  std::vector<KeyValue> out;
  for (const Node* node = get_next(head_); node != tail_; node = get_next(node)) {
    out.push_back({node->key, node->value});
  }
  return out;
}

std::size_t BundledLinkedList::size() const { return items().size(); }

std::pair<std::size_t, std::size_t> BundledLinkedList::live_objects() const {
  std::size_t nodes = 0;
  std::size_t entries = 0;
  for (const Node* node = head_; node != nullptr; node = get_next(node)) {
    ++nodes;
    entries += node->bundle.size();
  }
  return {nodes, entries};
}

std::vector<BundleDump> BundledLinkedList::dump_bundles() const {
  // Every node reachable through a plain link or any bundle entry.
  std::vector<BundleDump> out;
  std::set<const Node*> seen{head_};
  std::vector<const Node*> work{head_};
  while (!work.empty()) {
    const Node* node = work.back();
    work.pop_back();
    if (node == tail_) continue;
    BundleDump dump{node->key, {}};
    for (auto [target, ts] : node->bundle.entries()) {
      dump.entries.emplace_back(target->key, ts);
      if (seen.insert(target).second) work.push_back(target);
    }
    out.push_back(std::move(dump));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.node_key < b.node_key; });
  return out;
}

std::string BundledLinkedList::check_invariants() const {
  std::ostringstream why;
  Key previous = kMinSentinelKey;
  for (const Node* node = head_; node != tail_; node = get_next(node)) {
    if (node != head_ && node->key <= previous) why << "keys not increasing at " << node->key << "; ";
    previous = node->key;
    auto [target, ts] = node->bundle.newest();
    if (ts == kPendingTs) why << "pending head at " << node->key << "; ";
    if (target != get_next(node)) why << "link/bundle disagreement at " << node->key << "; ";
    Timestamp last = kPendingTs;
    for (auto [t, entry_ts] : node->bundle.entries()) {
      const bool ordered = rt_.clock().mode() == ClockMode::updates_advance ? entry_ts < last : entry_ts <= last;
      if (!ordered) why << "bundle order broken at " << node->key << "; ";
      last = entry_ts;
    }
  }
  return why.str();
}

}  // namespace bundled
