#include "bundled/harness/selftest.hpp"

#include <ostream>
#include <sstream>

#include "bundled/citrus_tree.hpp"
#include "bundled/linked_list.hpp"
#include "bundled/skip_list.hpp"

namespace bundled::harness {

namespace {

constexpr Timestamp kLastTs = 4;
constexpr Key kLow = 0;
constexpr Key kHigh = 100;

const std::vector<std::vector<Key>> kExpectedSnapshots{{}, {20}, {20, 30}, {10, 20, 30}, {10, 30}};

std::string list_name(Key key) {
  if (key == kMinSentinelKey) return "head";
  if (key == kMaxSentinelKey) return "tail";
  return std::to_string(key);
}

bool list_table_matches(const std::vector<BundleDump>& dump) {
  const std::vector<BundleDump> expected{
      {kMinSentinelKey, {{10, 3}, {20, 1}, {kMaxSentinelKey, 0}}},
      {10, {{30, 4}, {20, 3}}},
      {20, {{kMinSentinelKey, 4}, {30, 2}, {kMaxSentinelKey, 1}}},
      {30, {{kMaxSentinelKey, 2}}},
  };
  if (dump.size() != expected.size()) return false;
  for (std::size_t i = 0; i < dump.size(); ++i) {
    if (dump[i].node_key != expected[i].node_key || dump[i].entries != expected[i].entries) return false;
  }
  return true;
}

std::string format_list_table(const std::vector<BundleDump>& dump) {
  std::ostringstream out;
  for (const auto& node : dump) {
    out << "  " << list_name(node.node_key) << ":";
    for (auto [target, ts] : node.entries) out << "  (" << ts << " -> " << list_name(target) << ")";
    out << '\n';
  }
  return out.str();
}

bool tree_table_matches(const std::vector<TreeBundleDump>& dump) {
  using Entries = std::vector<std::pair<std::size_t, Timestamp>>;
  constexpr auto nil = TreeBundleDump::kNil;
  struct Expected {
    Key key;
    bool linked;
    Entries left;
    Entries right;
  };
  // Ids follow discovery order: root, the successor copy, 10, then the
  // removed 20 and the old 30, reachable only through bundles.
  const std::vector<Expected> expected{
      {kMaxSentinelKey, true, {{1, 4}, {3, 1}, {nil, 0}}, {{nil, 0}}},
      {30, true, {{2, 4}}, {{nil, 4}}},
      {10, true, {{nil, 3}}, {{nil, 3}}},
      {20, false, {{0, 4}, {2, 3}, {nil, 1}}, {{0, 4}, {4, 2}, {nil, 1}}},
      {30, false, {{nil, 2}}, {{nil, 2}}},
  };
  if (dump.size() != expected.size()) return false;
  for (std::size_t i = 0; i < dump.size(); ++i) {
    const auto& e = expected[i];
    if (dump[i].key != e.key || dump[i].linked != e.linked || dump[i].entries[0] != e.left ||
        dump[i].entries[1] != e.right) {
      return false;
    }
  }
  return true;
}

std::string format_tree_table(const std::vector<TreeBundleDump>& dump) {
  auto name = [&](std::size_t id) -> std::string {
    if (id == TreeBundleDump::kNil) return "nil";
    const Key key = dump[id].key;
    return "#" + std::to_string(id) + ":" + (key == kMaxSentinelKey ? std::string{"root"} : std::to_string(key));
  };
  std::ostringstream out;
  for (const auto& node : dump) {
    out << "  " << name(node.id) << (node.linked ? "" : " (unlinked)") << '\n';
    for (int dir = 0; dir < 2; ++dir) {
      out << "    " << (dir == 0 ? "left: " : "right:");
      for (auto [target, ts] : node.entries[static_cast<std::size_t>(dir)]) {
        out << "  (" << ts << " -> " << name(target) << ")";
      }
      out << '\n';
    }
  }
  return out.str();
}

template <class DS>
void replay(DS& ds, SelftestResult& result) {
  const ThreadId tid{0};
  OracleInput oracle;
  oracle.key_range = kHigh + 1;
  auto log = [&](Key key, bool insert, const UpdateResult& r) {
    if (r) oracle.updates.push_back({key, insert, r.ts, r.order});
  };
  log(20, true, ds.insert(tid, 20, 20));
  log(30, true, ds.insert(tid, 30, 30));
  log(10, true, ds.insert(tid, 10, 10));
  log(20, false, ds.remove(tid, 20));

  for (Timestamp ts = 0; ts <= kLastTs; ++ts) {
    std::vector<Key> keys;
    for (const auto& kv : ds.range_query_at(tid, kLow, kHigh, ts).entries) keys.push_back(kv.key);
    oracle.range_queries.push_back({kLow, kHigh, ts, keys});
    result.snapshots.push_back(std::move(keys));
  }
  result.snapshots_match = result.snapshots == kExpectedSnapshots;
  result.validation = oracle_validate(std::move(oracle));
}

}  // namespace

SelftestResult run_golden_script(StructureKind ds) {
  SelftestResult result{ds, {}, {}, false, false, {}};
  switch (ds) {
    case StructureKind::list: {
      BundledLinkedList list;
      replay(list, result);
      const auto dump = list.dump_bundles();
      result.bundles_match = list_table_matches(dump);
      result.bundle_table = format_list_table(dump);
      break;
    }
    case StructureKind::skiplist: {
      BundledSkipList skiplist;
      replay(skiplist, result);
      const auto dump = skiplist.dump_bundles();
      result.bundles_match = list_table_matches(dump);
      result.bundle_table = format_list_table(dump);
      break;
    }
    case StructureKind::bst: {
      BundledCitrusTree tree;
      replay(tree, result);
      const auto dump = tree.dump_bundles();
      result.bundles_match = tree_table_matches(dump);
      result.bundle_table = format_tree_table(dump);
      break;
    }
  }
  return result;
}

bool run_selftest(std::ostream& out) {
  bool all = true;
  for (auto kind : {StructureKind::list, StructureKind::skiplist, StructureKind::bst}) {
    const SelftestResult r = run_golden_script(kind);
    out << to_string(kind) << ": insert(20) insert(30) insert(10) remove(20)\n" << r.bundle_table;
    for (std::size_t ts = 0; ts < r.snapshots.size(); ++ts) {
      out << "  rq[0,100] @ ts " << ts << ": {";
      for (std::size_t i = 0; i < r.snapshots[ts].size(); ++i) out << (i == 0 ? "" : ",") << r.snapshots[ts][i];
      out << "}\n";
    }
    out << "  bundles " << (r.bundles_match ? "match" : "MISMATCH") << ", snapshots "
        << (r.snapshots_match ? "match" : "MISMATCH") << ", oracle violations " << r.validation.total_violations()
        << "\n\n";
    all = all && r.ok();
  }
  return all;
}

}  // namespace bundled::harness
