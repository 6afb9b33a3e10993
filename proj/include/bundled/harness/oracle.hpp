#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bundled/types.hpp"

namespace bundled::harness {

/// A successful update, ordered by linearization timestamp. Ties on `ts`
/// (possible when range queries advance the clock) are broken by `order`.
struct UpdateRecord {
  Key key;
  bool insert;
  Timestamp ts;
  std::uint64_t order;
};

struct RangeQueryRecord {
  Key low;
  Key high;
  Timestamp snapshot;
  std::vector<Key> keys;
};

/// The contains may take effect at any point of the replay between the last
/// update with ts <= c1 and the last update with ts <= c2.
struct ContainsRecord {
  Key key;
  bool result;
  Timestamp c1;
  Timestamp c2;
};

struct OracleInput {
  Key key_range = 0;
  std::vector<UpdateRecord> updates;
  std::vector<RangeQueryRecord> range_queries;
  std::vector<ContainsRecord> contains;
};

struct Violation {
  enum class Kind : std::uint8_t { range_query, contains } kind;
  std::string detail;
};

struct ValidationReport {
  std::size_t range_queries_checked = 0;
  std::size_t contains_checked = 0;
  std::size_t range_query_violations = 0;
  std::size_t contains_violations = 0;
  /// Every violating entry, expected versus actual.
  std::vector<Violation> violations;

  [[nodiscard]] std::size_t total_violations() const noexcept {
    return range_query_violations + contains_violations;
  }
  [[nodiscard]] bool ok() const noexcept { return total_violations() == 0; }
};

/// Replays the updates in linearization order and checks every range query
/// against the state at its snapshot and every contains against its window.
/// Takes the input by value: the update log is sorted in place.
[[nodiscard]] ValidationReport oracle_validate(OracleInput input);

}  // namespace bundled::harness
