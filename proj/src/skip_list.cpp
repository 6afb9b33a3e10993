#include "bundled/skip_list.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bundled {

using Node = BundledSkipList::Node;

namespace {

Node* next_at(const Node* node, int level) noexcept {
  return node->next[static_cast<std::size_t>(level)].load(std::memory_order_acquire);
}

/// Unlocks the distinct predecessors locked at levels [0, highest].
template <class Level>
void unlock_preds(const Level& preds, int highest) noexcept {
  const Node* previous = nullptr;
  for (int level = 0; level <= highest; ++level) {
    Node* pred = preds[static_cast<std::size_t>(level)];
    if (pred != previous) pred->lock.unlock();
    previous = pred;
  }
}

}  // namespace

BundledSkipList::BundledSkipList(const RuntimeConfig& config, int levels)
    : rt_{config}, levels_{levels}, rngs_{std::make_unique<LevelRng[]>(config.max_threads)} {
  if (levels < 1 || levels > kMaxLevels) throw std::invalid_argument{"skip list levels out of range"};
  for (std::size_t i = 0; i < config.max_threads; ++i) {
    std::seed_seq seq{config.seed, static_cast<std::uint64_t>(i), std::uint64_t{0x5eed}};
    rngs_[i].engine.seed(seq);
  }
  tail_ = new_node(kMaxSentinelKey, 0, levels_ - 1);
  head_ = new_node(kMinSentinelKey, 0, levels_ - 1);
  for (int level = 0; level < levels_; ++level) {
    head_->next[static_cast<std::size_t>(level)].store(tail_, std::memory_order_relaxed);
  }
  head_->fully_linked.store(true, std::memory_order_relaxed);
  tail_->fully_linked.store(true, std::memory_order_relaxed);
  head_->bundle.init(tail_);
  rt_.audit().entries_allocated();
}

BundledSkipList::~BundledSkipList() {
  Node* node = head_;
  while (node != nullptr) {
    Node* next = next_at(node, 0);
    rt_.free_node_now(node);
    node = next;
  }
}

Node* BundledSkipList::new_node(Key key, Value value, int top) {
  rt_.audit().nodes_allocated();
  return new Node{key, value, top};
}

int BundledSkipList::random_level(ThreadId tid) {
  auto& engine = rngs_[tid.value].engine;
  int level = 0;
  while (level < levels_ - 1) {
    std::uint64_t bits = engine();
    for (int i = 0; i < 64 && level < levels_ - 1; ++i, bits >>= 1) {
      if ((bits & 1U) == 0) return level;
      ++level;
    }
  }
  return level;
}

int BundledSkipList::find(Key key, Level& preds, Level& succs) const noexcept {
  int found = -1;
  Node* pred = head_;
  for (int level = levels_ - 1; level >= 0; --level) {
    Node* curr = next_at(pred, level);
    while (curr->key < key) {
      pred = curr;
      curr = next_at(pred, level);
    }
    if (found == -1 && curr->key == key) found = level;
    preds[static_cast<std::size_t>(level)] = pred;
    succs[static_cast<std::size_t>(level)] = curr;
  }
  return found;
}

Node* BundledSkipList::data_pred(Key key) const noexcept {
  Node* pred = head_;
  for (int level = levels_ - 1; level >= 0; --level) {
    Node* curr = next_at(pred, level);
    while (curr->key < key) {
      pred = curr;
      curr = next_at(pred, level);
    }
  }
  return pred;
}

UpdateResult BundledSkipList::insert(ThreadId tid, Key key, Value value) {
  check_user_key(key);
  const int top = random_level(tid);
  EpochGuard epoch{rt_.epochs(), tid};
  Level preds{};
  Level succs{};
  while (true) {
    const int found = find(key, preds, succs);
    if (found != -1) {
      Node* existing = succs[static_cast<std::size_t>(found)];
      if (!existing->marked.load(std::memory_order_acquire)) {
        spin_until([existing] { return existing->fully_linked.load(std::memory_order_acquire); }, rt_.wait());
        return {};
      }
      continue;
    }

    int highest_locked = -1;
    bool valid = true;
    const Node* previous = nullptr;
    for (int level = 0; valid && level <= top; ++level) {
      Node* pred = preds[static_cast<std::size_t>(level)];
      Node* succ = succs[static_cast<std::size_t>(level)];
      if (pred != previous) {
        pred->lock.lock();
        previous = pred;
      }
      highest_locked = level;
      valid = !pred->marked.load(std::memory_order_acquire) && !succ->marked.load(std::memory_order_acquire) &&
              next_at(pred, level) == succ;
    }
    if (!valid) {
      unlock_preds(preds, highest_locked);
      continue;
    }

    Node* node = new_node(key, value, top);
    for (int level = 0; level <= top; ++level) {
      node->next[static_cast<std::size_t>(level)].store(succs[static_cast<std::size_t>(level)],
                                                         std::memory_order_relaxed);
    }
    const std::array<BundleTarget<Node>, 2> targets{{{&node->bundle, succs[0]}, {&preds[0]->bundle, node}}};
    rt_.audit().entries_allocated(targets.size());
    const auto [ts, order] = rt_.prepare<Node>(targets);
    for (int level = 0; level <= top; ++level) {
      preds[static_cast<std::size_t>(level)]->next[static_cast<std::size_t>(level)].store(
          node, std::memory_order_release);
    }
    node->fully_linked.store(true, std::memory_order_release);
    finalize_bundles<Node>(targets, ts);
    unlock_preds(preds, highest_locked);
    return {true, ts, order};
  }
}

UpdateResult BundledSkipList::remove(ThreadId tid, Key key) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  Level preds{};
  Level succs{};
  Node* victim = nullptr;
  int top = -1;
  while (true) {
    const int found = find(key, preds, succs);
    if (victim == nullptr) {
      if (found == -1) return {};
      Node* candidate = succs[static_cast<std::size_t>(found)];
      if (candidate->marked.load(std::memory_order_acquire)) return {};
      if (!candidate->fully_linked.load(std::memory_order_acquire)) {
        // Its insert already took a timestamp; the key is present.
        spin_until([candidate] { return candidate->fully_linked.load(std::memory_order_acquire); }, rt_.wait());
        continue;
      }
      if (candidate->top_level != found) continue;
      candidate->lock.lock();
      if (candidate->marked.load(std::memory_order_acquire)) {
        candidate->lock.unlock();
        return {};
      }
      victim = candidate;
      top = victim->top_level;
    }

    int highest_locked = -1;
    bool valid = true;
    const Node* previous = nullptr;
    for (int level = 0; valid && level <= top; ++level) {
      Node* pred = preds[static_cast<std::size_t>(level)];
      if (pred != previous) {
        pred->lock.lock();
        previous = pred;
      }
      highest_locked = level;
      valid = !pred->marked.load(std::memory_order_acquire) && next_at(pred, level) == victim;
    }
    if (!valid) {
      unlock_preds(preds, highest_locked);
      continue;
    }

    Node* successor = next_at(victim, 0);
    const std::array<BundleTarget<Node>, 2> targets{{{&preds[0]->bundle, successor}, {&victim->bundle, head_}}};
    rt_.audit().entries_allocated(targets.size());
    const auto [ts, order] = rt_.prepare<Node>(targets);
    victim->marked.store(true, std::memory_order_release);
    for (int level = top; level >= 0; --level) {
      preds[static_cast<std::size_t>(level)]->next[static_cast<std::size_t>(level)].store(
          next_at(victim, level), std::memory_order_release);
    }
    finalize_bundles<Node>(targets, ts);
    unlock_preds(preds, highest_locked);
    victim->lock.unlock();
    rt_.retire_node(tid, victim);
    return {true, ts, order};
  }
}

bool BundledSkipList::contains(ThreadId tid, Key key) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  const Node* node = data_pred(key);
  do {
    node = node->bundle.dereference(kContainsTs, rt_.wait());
  } while (node->key < key);
  return node->key == key;
}

std::vector<KeyValue> BundledSkipList::enter_and_collect(const Node* pred, Key low, Key high, Timestamp ts,
                                                         RangeQueryStats* stats) const {
  std::size_t enter_derefs = 0;
  const Node* node = pred;
  do {
    node = node->bundle.dereference(ts, rt_.wait());
    ++enter_derefs;
  } while (node->key < low);

  std::vector<KeyValue> out;
  std::size_t collect_derefs = 1;
  while (node->key <= high) {
    out.push_back({node->key, node->value});
    node = node->bundle.dereference(ts, rt_.wait());
    ++collect_derefs;
  }
  if (stats != nullptr) {
    stats->enter_derefs = enter_derefs - 1;
    stats->collect_derefs = collect_derefs;
  }
  return out;
}

RangeQueryResult BundledSkipList::range_query(ThreadId tid, Key low, Key high, RangeQueryStats* stats) {
  check_range(low, high);
  EpochGuard epoch{rt_.epochs(), tid};
  const Node* pred = data_pred(low);

  if (rt_.unsafe_range_queries()) {
    RangeQueryResult result{rt_.clock().read(), {}};
    for (const Node* node = next_at(pred, 0); node->key <= high; node = next_at(node, 0)) {
      result.entries.push_back({node->key, node->value});
    }
    return result;
  }

  SnapshotGuard snapshot{rt_, tid};
  return {snapshot.ts(), enter_and_collect(pred, low, high, snapshot.ts(), stats)};
}

RangeQueryResult BundledSkipList::range_query_at(ThreadId tid, Key low, Key high, Timestamp ts) {
  check_range(low, high);
  EpochGuard epoch{rt_.epochs(), tid};
  SnapshotGuard snapshot{rt_, tid, ts};
  return {ts, enter_and_collect(head_, low, high, ts, nullptr)};
}

CleanupStats BundledSkipList::cleanup_pass(ThreadId tid) {
  std::lock_guard serial{cleanup_mutex_};
  EpochGuard epoch{rt_.epochs(), tid};
  CleanupStats stats;
  stats.threshold = rt_.retirement_threshold();
  for (Node* node = head_; node != tail_; node = next_at(node, 0)) {
    stats.entries_retired += node->bundle.reclaim(
        stats.threshold, [&](BundleEntry<Node>* entry) { rt_.retire_entry(tid, entry); });
    ++stats.bundles_visited;
  }
  return stats;
}

std::vector<KeyValue> BundledSkipList::items() const {
  std::vector<KeyValue> out;
  for (const Node* node = next_at(head_, 0); node != tail_; node = next_at(node, 0)) {
    out.push_back({node->key, node->value});
  }
  return out;
}

std::size_t BundledSkipList::size() const { return items().size(); }

std::pair<std::size_t, std::size_t> BundledSkipList::live_objects() const {
  std::size_t nodes = 0;
  std::size_t entries = 0;
  for (const Node* node = head_; node != nullptr; node = next_at(node, 0)) {
    ++nodes;
    entries += node->bundle.size();
  }
  return {nodes, entries};
}

std::vector<BundleDump> BundledSkipList::dump_bundles() const {
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

std::string BundledSkipList::check_invariants() const {
  std::ostringstream why;
  for (int level = 0; level < levels_; ++level) {
    Key previous = kMinSentinelKey;
    for (const Node* node = next_at(head_, level); node != tail_; node = next_at(node, level)) {
      if (node->key <= previous) why << "level " << level << " not increasing at " << node->key << "; ";
      if (node->top_level < level) why << "node " << node->key << " linked above its height; ";
      previous = node->key;
    }
  }
  for (const Node* node = head_; node != tail_; node = next_at(node, 0)) {
    auto [target, ts] = node->bundle.newest();
    if (ts == kPendingTs) why << "pending head at " << node->key << "; ";
    if (target != next_at(node, 0)) why << "link/bundle disagreement at " << node->key << "; ";
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
