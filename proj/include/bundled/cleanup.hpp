#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "bundled/runtime.hpp"

namespace bundled {

/// Runs a cleanup pass every `interval` on its own thread until stopped,
/// keeping the threshold used by each pass.
class BackgroundCleaner {
 public:
  using Pass = std::function<CleanupStats()>;

  BackgroundCleaner(Pass pass, std::chrono::milliseconds interval)
      : pass_{std::move(pass)}, interval_{interval}, worker_{[this] { run(); }} {}

  ~BackgroundCleaner() { stop(); }

  BackgroundCleaner(const BackgroundCleaner&) = delete;
  BackgroundCleaner& operator=(const BackgroundCleaner&) = delete;

  /// Stops and joins the worker. A pass in progress completes first.
  void stop() {
    {
      std::lock_guard lock{mutex_};
      stopping_ = true;
    }
    wake_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  [[nodiscard]] std::vector<Timestamp> thresholds() const {
    std::lock_guard lock{mutex_};
    return thresholds_;
  }

  [[nodiscard]] std::size_t entries_retired() const {
    std::lock_guard lock{mutex_};
    return entries_retired_;
  }

 private:
  // condition_variable_any's stop_token waits can self-deadlock in
  // libstdc++ 11, hence a plain flag. The deadline is on system_clock:
  // steady_clock waits go through pthread_cond_clockwait, which GCC 11's
  // ThreadSanitizer does not intercept (it then reports the waiter as still
  // holding the mutex).
  void run() {
    std::unique_lock lock{mutex_};
    while (true) {
      wake_.wait_until(lock, std::chrono::system_clock::now() + interval_, [this] { return stopping_; });
      if (stopping_) break;
      lock.unlock();
      const CleanupStats stats = pass_();
      lock.lock();
      thresholds_.push_back(stats.threshold);
      entries_retired_ += stats.entries_retired;
    }
  }

  Pass pass_;
  std::chrono::milliseconds interval_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  bool stopping_ = false;
  std::vector<Timestamp> thresholds_;
  std::size_t entries_retired_ = 0;
  // Declared last so every member above exists before the thread starts.
  std::thread worker_;
};

}  // namespace bundled
