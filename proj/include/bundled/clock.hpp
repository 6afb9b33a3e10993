#pragma once

#include <atomic>
#include <cstdint>
#include <limits>

namespace bundled {

using Timestamp = std::uint64_t;

/// Reserved timestamp of an entry whose update has not been finalized yet.
inline constexpr Timestamp kPendingTs = std::numeric_limits<Timestamp>::max();
/// Snapshot used by contains: satisfied by the newest finalized entry.
inline constexpr Timestamp kContainsTs = kPendingTs - 1;

/// Which operation class moves the clock forward.
enum class ClockMode : std::uint8_t {
  /// Updates fetch-and-add the clock; range queries read it.
  updates_advance,
  /// Range queries fetch-and-add the clock and snapshot the pre-increment
  /// value; updates read it. Timestamps are no longer unique per update.
  range_queries_advance,
};

/// Global logical clock totally ordering updates.
class alignas(64) GlobalClock {
 public:
  explicit GlobalClock(ClockMode mode = ClockMode::updates_advance) noexcept
      : mode_{mode}, now_{mode == ClockMode::range_queries_advance ? 1U : 0U} {}

  GlobalClock(const GlobalClock&) = delete;
  GlobalClock& operator=(const GlobalClock&) = delete;

  [[nodiscard]] Timestamp read() const noexcept { return now_.load(std::memory_order_seq_cst); }

  /// Atomically increments and returns the post-increment value.
  Timestamp advance() noexcept {
    const auto previous = now_.fetch_add(1, std::memory_order_seq_cst);
    if (previous + 1 >= kContainsTs) [[unlikely]] overflow();
    return previous + 1;
  }

  /// Linearization timestamp for an update whose pending entries are installed.
  Timestamp stamp_update() noexcept {
    return mode_ == ClockMode::updates_advance ? advance() : read();
  }

  /// Snapshot timestamp for a range query.
  Timestamp stamp_snapshot() noexcept {
    return mode_ == ClockMode::updates_advance ? read() : advance() - 1;
  }

  [[nodiscard]] ClockMode mode() const noexcept { return mode_; }

 private:
  [[noreturn]] static void overflow() noexcept;

  const ClockMode mode_;
  std::atomic<Timestamp> now_;
};

static_assert(sizeof(GlobalClock) == 64);

}  // namespace bundled
