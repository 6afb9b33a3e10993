#pragma once

#include <atomic>
#include <cstdint>
#include <thread>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif

namespace bundled {

/// How long a waiter busy-spins before yielding the processor.
struct WaitPolicy {
  std::uint32_t spin_budget = 100;
};

inline void cpu_relax() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  _mm_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#endif
}

/// Bounded-spin-then-yield backoff.
class SpinWait {
 public:
  explicit SpinWait(WaitPolicy policy = {}) noexcept : budget_{policy.spin_budget} {}

  void once() noexcept {
    if (spins_ < budget_) {
      ++spins_;
      cpu_relax();
    } else {
      std::this_thread::yield();
    }
  }

 private:
  std::uint32_t budget_;
  std::uint32_t spins_ = 0;
};

template <class Predicate>
void spin_until(Predicate&& done, WaitPolicy policy = {}) noexcept(noexcept(done())) {
  SpinWait wait{policy};
  while (!done()) wait.once();
}

/// Test-and-test-and-set lock. Satisfies Lockable.
class SpinLock {
 public:
  void lock() noexcept {
    SpinWait wait;
    while (true) {
      if (!locked_.exchange(true, std::memory_order_acquire)) return;
      while (locked_.load(std::memory_order_relaxed)) wait.once();
    }
  }

  bool try_lock() noexcept {
    return !locked_.load(std::memory_order_relaxed) &&
           !locked_.exchange(true, std::memory_order_acquire);
  }

  void unlock() noexcept { locked_.store(false, std::memory_order_release); }

  [[nodiscard]] bool is_locked() const noexcept { return locked_.load(std::memory_order_relaxed); }

 private:
  std::atomic<bool> locked_{false};
};

}  // namespace bundled
