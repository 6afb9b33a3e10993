#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "bundled/types.hpp"

namespace bundled::harness {

enum class StructureKind : std::uint8_t { list, skiplist, bst };

[[nodiscard]] std::string_view to_string(StructureKind kind) noexcept;
[[nodiscard]] std::optional<StructureKind> parse_structure(std::string_view name) noexcept;

/// Operation mix in percent: updates, contains, range queries.
struct Mix {
  unsigned updates = 10;
  unsigned contains = 80;
  unsigned range_queries = 10;

  friend bool operator==(const Mix&, const Mix&) = default;
};

/// Parses "U-C-RQ" (e.g. "10-80-10"). Throws std::invalid_argument on
/// malformed input or when the parts do not sum to 100.
[[nodiscard]] Mix parse_mix(std::string_view text);
[[nodiscard]] std::string to_string(const Mix& mix);

/// Key range used when none is given on the command line.
[[nodiscard]] Key default_key_range(StructureKind kind) noexcept;

struct WorkloadConfig {
  StructureKind ds = StructureKind::list;
  std::size_t threads = 1;
  double duration_s = 1.0;
  Mix mix{};
  /// Keys are drawn uniformly from [0, key_range).
  Key key_range = 10'000;
  Key rq_size = 50;
  std::uint64_t seed = 1;
  bool rq_advance = false;
  bool validate = false;
  bool unsafe_rq = false;
  bool cleanup = true;
  std::chrono::milliseconds cleanup_interval{10};
  std::uint32_t epoch_advance_ops = 32;
  /// Per-thread operation budget; 0 runs for `duration_s` only.
  std::uint64_t max_ops_per_thread = 0;

  /// Throws std::invalid_argument describing the first broken invariant.
  void check() const;
};

}  // namespace bundled::harness
