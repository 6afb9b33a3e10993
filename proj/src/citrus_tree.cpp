#include "bundled/citrus_tree.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>

namespace bundled {

using Node = BundledCitrusTree::Node;

namespace {

constexpr int kL = BundledCitrusTree::kLeft;
constexpr int kR = BundledCitrusTree::kRight;

Node* child_of(const Node* node, int dir) noexcept {
  return node->child[static_cast<std::size_t>(dir)].load(std::memory_order_acquire);
}

std::uint64_t tag_of(const Node* node, int dir) noexcept {
  return node->tag[static_cast<std::size_t>(dir)].load(std::memory_order_acquire);
}

Bundle<Node>* bundle_of(Node* node, int dir) noexcept { return &node->bundle[static_cast<std::size_t>(dir)]; }

void set_child(Node* node, int dir, Node* child) noexcept {
  node->child[static_cast<std::size_t>(dir)].store(child, std::memory_order_seq_cst);
}

void bump_tag(Node* node, int dir) noexcept {
  node->tag[static_cast<std::size_t>(dir)].fetch_add(1, std::memory_order_acq_rel);
}

}  // namespace

BundledCitrusTree::BundledCitrusTree(const RuntimeConfig& config) : rt_{config} {
  nil_ = new_node(kMinSentinelKey, 0, nullptr, nullptr);
  root_ = new_node(kMaxSentinelKey, 0, nil_, nil_);
  root_->bundle[0].init(nil_);
  root_->bundle[1].init(nil_);
  rt_.audit().entries_allocated(2);
}

BundledCitrusTree::~BundledCitrusTree() {
  std::vector<Node*> work{root_};
  while (!work.empty()) {
    Node* node = work.back();
    work.pop_back();
    for (int dir : {kL, kR}) {
      Node* c = child_of(node, dir);
      if (c != nil_) work.push_back(c);
    }
    rt_.free_node_now(node);
  }
  rt_.free_node_now(nil_);
}

Node* BundledCitrusTree::new_node(Key key, Value value, Node* left, Node* right) {
  rt_.audit().nodes_allocated();
  return new Node{key, value, left, right};
}

BundledCitrusTree::Position BundledCitrusTree::locate(ThreadId tid, Key key) {
  ReadSection section{rt_.epochs(), tid};
  Position pos{root_, nullptr, kL, tag_of(root_, kL)};
  pos.curr = child_of(root_, kL);
  while (pos.curr != nil_ && pos.curr->key != key) {
    pos.prev = pos.curr;
    pos.dir = key < pos.curr->key ? kL : kR;
    pos.tag = tag_of(pos.prev, pos.dir);
    pos.curr = child_of(pos.prev, pos.dir);
  }
  return pos;
}

bool BundledCitrusTree::validate(const Node* prev, std::uint64_t tag, const Node* curr, int dir) const noexcept {
  if (prev->marked.load(std::memory_order_acquire) || child_of(prev, dir) != curr) return false;
  if (curr == nil_) return tag_of(prev, dir) == tag;
  return !curr->marked.load(std::memory_order_acquire);
}

UpdateResult BundledCitrusTree::insert(ThreadId tid, Key key, Value value) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  while (true) {
    const Position pos = locate(tid, key);
    if (pos.curr != nil_) return {};
    std::lock_guard prev_lock{pos.prev->lock};
    if (!validate(pos.prev, pos.tag, nil_, pos.dir)) continue;

    Node* node = new_node(key, value, nil_, nil_);
    const std::array<BundleTarget<Node>, 3> targets{
        {{bundle_of(node, kL), nil_}, {bundle_of(node, kR), nil_}, {bundle_of(pos.prev, pos.dir), node}}};
    rt_.audit().entries_allocated(targets.size());
    const auto [ts, order] = rt_.prepare<Node>(targets);
    set_child(pos.prev, pos.dir, node);
    finalize_bundles<Node>(targets, ts);
    return {true, ts, order};
  }
}

UpdateResult BundledCitrusTree::remove(ThreadId tid, Key key) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  while (true) {
    const Position pos = locate(tid, key);
    if (pos.curr == nil_) return {};
    Node* prev = pos.prev;
    Node* curr = pos.curr;
    std::unique_lock prev_lock{prev->lock};
    std::unique_lock curr_lock{curr->lock};
    if (!validate(prev, 0, curr, pos.dir)) continue;

    Node* left = child_of(curr, kL);
    Node* right = child_of(curr, kR);
    if (left != nil_ && right != nil_) {
      auto relocated = relocate(tid, prev, curr, pos.dir);
      if (!relocated) continue;
      curr_lock.unlock();
      prev_lock.unlock();
      rt_.retire_node(tid, curr);
      rt_.retire_node(tid, relocated->succ);
      return relocated->result;
    }

    Node* child = left != nil_ ? left : right;
    const std::array<BundleTarget<Node>, 3> targets{
        {{bundle_of(prev, pos.dir), child}, {bundle_of(curr, kL), root_}, {bundle_of(curr, kR), root_}}};
    rt_.audit().entries_allocated(targets.size());
    const auto [ts, order] = rt_.prepare<Node>(targets);
    curr->marked.store(true, std::memory_order_release);
    set_child(prev, pos.dir, child);
    if (child == nil_) bump_tag(prev, pos.dir);
    finalize_bundles<Node>(targets, ts);
    curr_lock.unlock();
    prev_lock.unlock();
    rt_.retire_node(tid, curr);
    return {true, ts, order};
  }
}

std::optional<BundledCitrusTree::Relocated> BundledCitrusTree::relocate(ThreadId tid, Node* prev, Node* curr,
                                                                         int dir) {
  Node* prev_succ = curr;
  Node* succ = nullptr;
  {
    ReadSection section{rt_.epochs(), tid};
    succ = child_of(curr, kR);
    for (Node* next = child_of(succ, kL); next != nil_; next = child_of(next, kL)) {
      prev_succ = succ;
      succ = next;
    }
  }
  const bool adjacent = prev_succ == curr;
  const int succ_dir = adjacent ? kR : kL;

  std::unique_lock<SpinLock> prev_succ_lock;
  if (!adjacent) prev_succ_lock = std::unique_lock{prev_succ->lock};
  std::unique_lock succ_lock{succ->lock};
  if (!validate(prev_succ, 0, succ, succ_dir) || !validate(succ, tag_of(succ, kL), nil_, kL)) return std::nullopt;

  Node* curr_left = child_of(curr, kL);
  Node* curr_right = child_of(curr, kR);
  Node* succ_right = child_of(succ, kR);
  Node* copy = new_node(succ->key, succ->value, curr_left, curr_right);
  std::unique_lock copy_lock{copy->lock};

  std::array<BundleTarget<Node>, 6> targets{{{bundle_of(prev, dir), copy},
                                             {bundle_of(copy, kL), curr_left},
                                             {bundle_of(copy, kR), adjacent ? succ_right : curr_right},
                                             {bundle_of(curr, kL), root_},
                                             {bundle_of(curr, kR), root_},
                                             {bundle_of(prev_succ, kL), succ_right}}};
  const std::span<const BundleTarget<Node>> sites{targets.data(), adjacent ? 5U : 6U};
  rt_.audit().entries_allocated(static_cast<std::int64_t>(sites.size()));

  relocations_started_.fetch_add(1, std::memory_order_seq_cst);
  const auto [ts, order] = rt_.prepare<Node>(sites);
  curr->marked.store(true, std::memory_order_release);
  set_child(prev, dir, copy);
  // Readers that passed curr before the copy was linked may still be
  // heading for the old successor.
  rt_.epochs().wait_for_readers(tid);
  succ->marked.store(true, std::memory_order_release);
  if (adjacent) {
    set_child(copy, kR, succ_right);
    if (succ_right == nil_) bump_tag(copy, kR);
  } else {
    set_child(prev_succ, kL, succ_right);
    if (succ_right == nil_) bump_tag(prev_succ, kL);
  }
  finalize_bundles<Node>(sites, ts);
  relocations_finished_.fetch_add(1, std::memory_order_seq_cst);
  return Relocated{{true, ts, order}, succ};
}

Node* BundledCitrusTree::enter_range(Node* start, Key low, Key high, Timestamp ts, std::size_t& derefs) const {
  // The root's key is above every user key, so it always steers left.
  Node* node = start;
  while (node != nil_ && (node->key < low || node->key > high)) {
    node = follow(node, high < node->key ? kL : kR, ts);
    ++derefs;
  }
  return node;
}

void BundledCitrusTree::collect(Node* first, Key low, Key high, Timestamp ts, std::vector<KeyValue>& out,
                                RangeQueryStats* stats) const {
  std::size_t derefs = 0;
  std::vector<Node*> stack{first};
  while (!stack.empty()) {
    Node* node = stack.back();
    stack.pop_back();
    if (node == nil_) continue;
    const bool inside = node->key >= low && node->key <= high;
    if (inside) {
      out.push_back({node->key, node->value});
    } else if (stats != nullptr) {
      stats->visited_outside.push_back(node->key);
    }
    if (node->key > low) {
      stack.push_back(follow(node, kL, ts));
      ++derefs;
    }
    if (node->key < high) {
      stack.push_back(follow(node, kR, ts));
      ++derefs;
    }
  }
  std::sort(out.begin(), out.end(), [](const KeyValue& a, const KeyValue& b) { return a.key < b.key; });
  if (stats != nullptr) stats->collect_derefs = derefs;
}

bool BundledCitrusTree::snapshot_lookup(ThreadId tid, Key key) {
  SnapshotGuard snapshot{rt_, tid};
  std::size_t derefs = 0;
  return enter_range(root_, key, key, snapshot.ts(), derefs) != nil_;
}

bool BundledCitrusTree::contains(ThreadId tid, Key key) {
  check_user_key(key);
  EpochGuard epoch{rt_.epochs(), tid};
  const std::uint64_t started = relocations_started();
  const std::uint64_t finished = relocations_finished();
  const Position pos = locate(tid, key);
  std::size_t derefs = 0;
  const bool found = enter_range(pos.prev, key, key, kContainsTs, derefs) != nil_;
  if (started == finished && relocations_started() == started) return found;
  contains_fallbacks_.fetch_add(1, std::memory_order_relaxed);
  return snapshot_lookup(tid, key);
}

RangeQueryResult BundledCitrusTree::range_query(ThreadId tid, Key low, Key high, RangeQueryStats* stats) {
  check_range(low, high);
  EpochGuard epoch{rt_.epochs(), tid};
  const std::uint64_t started = relocations_started();
  const std::uint64_t finished = relocations_finished();

  Node* prev = root_;
  Node* curr = nullptr;
  {
    ReadSection section{rt_.epochs(), tid};
    curr = child_of(root_, kL);
    while (curr != nil_ && (curr->key < low || curr->key > high)) {
      prev = curr;
      curr = child_of(prev, high < curr->key ? kL : kR);
    }
  }

  if (rt_.unsafe_range_queries()) {
    RangeQueryResult result{rt_.clock().read(), {}};
    std::vector<Node*> stack{curr};
    while (!stack.empty()) {
      Node* node = stack.back();
      stack.pop_back();
      if (node == nil_) continue;
      if (node->key >= low && node->key <= high) result.entries.push_back({node->key, node->value});
      if (node->key > low) stack.push_back(child_of(node, kL));
      if (node->key < high) stack.push_back(child_of(node, kR));
    }
    std::sort(result.entries.begin(), result.entries.end(),
              [](const KeyValue& a, const KeyValue& b) { return a.key < b.key; });
    return result;
  }

  SnapshotGuard snapshot{rt_, tid};
  const bool relocation_overlap = started != finished || relocations_started() != started;
  if (relocation_overlap) prev = root_;
  std::size_t derefs = 0;
  Node* first = enter_range(prev, low, high, snapshot.ts(), derefs);
  RangeQueryResult result{snapshot.ts(), {}};
  collect(first, low, high, snapshot.ts(), result.entries, stats);
  if (stats != nullptr) {
    stats->enter_derefs = derefs;
    stats->restarted_from_root = relocation_overlap;
  }
  return result;
}

RangeQueryResult BundledCitrusTree::range_query_at(ThreadId tid, Key low, Key high, Timestamp ts) {
  check_range(low, high);
  EpochGuard epoch{rt_.epochs(), tid};
  SnapshotGuard snapshot{rt_, tid, ts};
  std::size_t derefs = 0;
  RangeQueryResult result{ts, {}};
  collect(enter_range(root_, low, high, ts, derefs), low, high, ts, result.entries, nullptr);
  return result;
}

CleanupStats BundledCitrusTree::cleanup_pass(ThreadId tid) {
  std::lock_guard serial{cleanup_mutex_};
  EpochGuard epoch{rt_.epochs(), tid};
  CleanupStats stats;
  stats.threshold = rt_.retirement_threshold();
  std::vector<Node*> work{root_};
  while (!work.empty()) {
    Node* node = work.back();
    work.pop_back();
    for (int dir : {kL, kR}) {
      stats.entries_retired += bundle_of(node, dir)->reclaim(
          stats.threshold, [&](BundleEntry<Node>* entry) { rt_.retire_entry(tid, entry); });
      ++stats.bundles_visited;
      Node* c = child_of(node, dir);
      if (c != nil_) work.push_back(c);
    }
  }
  return stats;
}

std::vector<KeyValue> BundledCitrusTree::items() const {
  std::vector<KeyValue> out;
  std::vector<const Node*> stack;
  const Node* node = child_of(root_, kL);
  while (node != nil_ || !stack.empty()) {
    while (node != nil_) {
      stack.push_back(node);
      node = child_of(node, kL);
    }
    node = stack.back();
    stack.pop_back();
    out.push_back({node->key, node->value});
    node = child_of(node, kR);
  }
  return out;
}

std::size_t BundledCitrusTree::size() const { return items().size(); }

std::size_t BundledCitrusTree::height() const {
  std::size_t best = 0;
  std::vector<std::pair<const Node*, std::size_t>> work{{child_of(root_, kL), 1}};
  while (!work.empty()) {
    auto [node, depth] = work.back();
    work.pop_back();
    if (node == nil_) continue;
    best = std::max(best, depth);
    work.emplace_back(child_of(node, kL), depth + 1);
    work.emplace_back(child_of(node, kR), depth + 1);
  }
  return best;
}

std::pair<std::size_t, std::size_t> BundledCitrusTree::live_objects() const {
  std::size_t nodes = 1;  // nil
  std::size_t entries = 0;
  std::vector<const Node*> work{root_};
  while (!work.empty()) {
    const Node* node = work.back();
    work.pop_back();
    ++nodes;
    for (int dir : {kL, kR}) {
      entries += node->bundle[static_cast<std::size_t>(dir)].size();
      const Node* c = child_of(node, dir);
      if (c != nil_) work.push_back(c);
    }
  }
  return {nodes, entries};
}

std::vector<TreeBundleDump> BundledCitrusTree::dump_bundles() const {
  std::map<const Node*, std::size_t> ids;
  std::vector<const Node*> order;
  auto visit = [&](const Node* node) {
    if (node == nil_ || ids.contains(node)) return;
    ids.emplace(node, order.size());
    order.push_back(node);
  };
  // Plain-link nodes first (breadth first), then anything only bundles reach.
  visit(root_);
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (int dir : {kL, kR}) visit(child_of(order[i], dir));
  }
  const std::size_t linked = order.size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (int dir : {kL, kR}) {
      for (auto [target, ts] : order[i]->bundle[static_cast<std::size_t>(dir)].entries()) visit(target);
    }
  }

  std::vector<TreeBundleDump> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    TreeBundleDump dump;
    dump.id = i;
    dump.key = order[i]->key;
    dump.linked = i < linked;
    for (int dir : {kL, kR}) {
      for (auto [target, ts] : order[i]->bundle[static_cast<std::size_t>(dir)].entries()) {
        dump.entries[static_cast<std::size_t>(dir)].emplace_back(
            target == nil_ ? TreeBundleDump::kNil : ids.at(target), ts);
      }
    }
    out.push_back(std::move(dump));
  }
  return out;
}

std::string BundledCitrusTree::check_invariants() const {
  std::ostringstream why;
  struct Frame {
    const Node* node;
    Key low;
    Key high;
  };
  std::vector<Frame> work{{child_of(root_, kL), kMinSentinelKey, kMaxSentinelKey}};
  auto check_bundles = [&](const Node* node) {
    for (int dir : {kL, kR}) {
      const auto& bundle = node->bundle[static_cast<std::size_t>(dir)];
      auto [target, ts] = bundle.newest();
      if (ts == kPendingTs) why << "pending head at " << node->key << "; ";
      if (target != child_of(node, dir)) why << "link/bundle disagreement at " << node->key << "; ";
      Timestamp last = kPendingTs;
      for (auto [t, entry_ts] : bundle.entries()) {
        const bool ordered =
            rt_.clock().mode() == ClockMode::updates_advance ? entry_ts < last : entry_ts <= last;
        if (!ordered) why << "bundle order broken at " << node->key << "; ";
        last = entry_ts;
      }
    }
  };
  check_bundles(root_);
  if (child_of(root_, kR) != nil_) why << "root has a right child; ";
  while (!work.empty()) {
    const Frame frame = work.back();
    work.pop_back();
    if (frame.node == nil_) continue;
    const Key key = frame.node->key;
    if (key <= frame.low || key >= frame.high) why << "search order broken at " << key << "; ";
    if (frame.node->marked.load()) why << "marked node " << key << " still linked; ";
    check_bundles(frame.node);
    work.push_back({child_of(frame.node, kL), frame.low, key});
    work.push_back({child_of(frame.node, kR), key, frame.high});
  }
  return why.str();
}

}  // namespace bundled
