#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bundled/clock.hpp"

namespace bundled {

using Key = std::int64_t;
using Value = std::int64_t;

inline constexpr Key kMinSentinelKey = std::numeric_limits<Key>::min();
inline constexpr Key kMaxSentinelKey = std::numeric_limits<Key>::max();

/// Index of a registered worker slot. Every thread that touches a structure
/// uses its own slot; two threads must never share one concurrently.
struct ThreadId {
  std::size_t value = 0;
  constexpr explicit ThreadId(std::size_t v) noexcept : value{v} {}
  friend constexpr bool operator==(ThreadId, ThreadId) noexcept = default;
};

struct KeyValue {
  Key key;
  Value value;
  friend constexpr bool operator==(const KeyValue&, const KeyValue&) noexcept = default;
};

/// Outcome of an insert or remove. `ts` is the linearization timestamp of a
/// successful update; `order` is a tie-breaking sequence number taken right
/// after the timestamp when order tracking is enabled (zero
/// otherwise).
struct UpdateResult {
  bool applied = false;
  Timestamp ts = 0;
  std::uint64_t order = 0;

  explicit operator bool() const noexcept { return applied; }
};

struct RangeQueryResult {
  Timestamp snapshot = 0;
  std::vector<KeyValue> entries;
};

/// Optional instrumentation filled in by range queries.
struct RangeQueryStats {
  /// Bundle dereferences performed from the moment the range is entered:
  /// the dereference that reaches the first node at or past `low`, plus one
  /// per collected node.
  std::size_t collect_derefs = 0;
  std::size_t enter_derefs = 0;
  /// Tree only: the enter phase restarted from the root.
  bool restarted_from_root = false;
  /// Tree only: keys of visited nodes that fell outside [low, high].
  std::vector<Key> visited_outside;
};

inline void check_user_key(Key key) {
  if (key == kMinSentinelKey || key == kMaxSentinelKey) {
    throw std::out_of_range{"key collides with a sentinel"};
  }
}

inline void check_range(Key low, Key high) {
  check_user_key(low);
  check_user_key(high);
  if (low > high) throw std::invalid_argument{"range query requires low <= high"};
}

}  // namespace bundled
