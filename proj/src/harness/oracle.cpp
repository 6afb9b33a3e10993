#include "bundled/harness/oracle.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace bundled::harness {

namespace {

std::string format_keys(const std::vector<Key>& keys) {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < keys.size(); ++i) out << (i == 0 ? "" : ",") << keys[i];
  out << '}';
  return out.str();
}

void check_key(Key key, Key key_range) {
  if (key < 0 || key >= key_range) throw std::out_of_range{"logged key outside the key range"};
}

}  // namespace

ValidationReport oracle_validate(OracleInput input) {
  ValidationReport report;
  auto& updates = input.updates;
  std::sort(updates.begin(), updates.end(), [](const UpdateRecord& a, const UpdateRecord& b) {
    return a.ts != b.ts ? a.ts < b.ts : a.order < b.order;
  });
  for (const auto& u : updates) check_key(u.key, input.key_range);

  // Range queries: sweep the sorted update log once, in snapshot order.
  std::vector<std::size_t> rq_order(input.range_queries.size());
  std::iota(rq_order.begin(), rq_order.end(), std::size_t{0});
  std::stable_sort(rq_order.begin(), rq_order.end(), [&](std::size_t a, std::size_t b) {
    return input.range_queries[a].snapshot < input.range_queries[b].snapshot;
  });
  std::vector<std::uint8_t> present(static_cast<std::size_t>(input.key_range), 0);
  std::size_t applied = 0;
  std::vector<Key> expected;
  for (std::size_t index : rq_order) {
    const auto& rq = input.range_queries[index];
    while (applied < updates.size() && updates[applied].ts <= rq.snapshot) {
      present[static_cast<std::size_t>(updates[applied].key)] = updates[applied].insert ? 1 : 0;
      ++applied;
    }
    expected.clear();
    const Key from = std::max<Key>(rq.low, 0);
    const Key to = std::min<Key>(rq.high, input.key_range - 1);
    for (Key k = from; k <= to; ++k) {
      if (present[static_cast<std::size_t>(k)] != 0) expected.push_back(k);
    }
    ++report.range_queries_checked;
    if (expected != rq.keys) {
      ++report.range_query_violations;
      std::ostringstream detail;
      detail << "range query [" << rq.low << ", " << rq.high << "] at ts " << rq.snapshot << ": expected "
             << format_keys(expected) << " actual " << format_keys(rq.keys);
      report.violations.push_back({Violation::Kind::range_query, detail.str()});
    }
  }

  // Contains: per-key membership changes in replay order, checked against
  // each window.
  std::vector<std::vector<std::pair<Timestamp, bool>>> changes(static_cast<std::size_t>(input.key_range));
  for (const auto& u : updates) changes[static_cast<std::size_t>(u.key)].emplace_back(u.ts, u.insert);
  for (const auto& c : input.contains) {
    check_key(c.key, input.key_range);
    ++report.contains_checked;
    const auto& timeline = changes[static_cast<std::size_t>(c.key)];
    auto it = std::upper_bound(timeline.begin(), timeline.end(), c.c1,
                               [](Timestamp p, const auto& change) { return p < change.first; });
    bool state = it != timeline.begin() && std::prev(it)->second;
    bool ok = state == c.result;
    for (; !ok && it != timeline.end() && it->first <= c.c2; ++it) ok = it->second == c.result;
    if (!ok) {
      ++report.contains_violations;
      std::ostringstream detail;
      detail << "contains(" << c.key << ") in window [" << c.c1 << ", " << c.c2 << "]: expected "
             << (c.result ? "false" : "true") << " throughout, actual " << (c.result ? "true" : "false");
      report.violations.push_back({Violation::Kind::contains, detail.str()});
    }
  }
  return report;
}

}  // namespace bundled::harness
