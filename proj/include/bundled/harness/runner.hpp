#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bundled/harness/oracle.hpp"
#include "bundled/harness/workload.hpp"
#include "bundled/reclamation.hpp"

namespace bundled::harness {

struct RunOptions {
  /// Keep the merged logs in RunStats::logs (validated runs only).
  bool keep_logs = false;
};

struct RunStats {
  WorkloadConfig config;
  std::size_t trial = 0;
  double elapsed_s = 0.0;
  std::uint64_t total_ops = 0;
  std::uint64_t updates = 0;
  std::uint64_t contains = 0;
  std::uint64_t rqs = 0;
  std::uint64_t successful_updates = 0;
  std::vector<std::uint64_t> per_thread_ops;
  double throughput_mops = 0.0;

  std::size_t prefill_size = 0;
  /// Post-prefill contents equal the logged prefill inserts.
  bool prefill_matches_log = false;

  std::optional<ValidationReport> validation;
  std::optional<OracleInput> logs;
  /// List only: range queries whose collect phase did not take exactly
  /// |result| + 1 bundle dereferences.
  std::size_t collect_checked = 0;
  std::size_t collect_mismatches = 0;
  /// Tree only: range queries that restarted from the root, and contains
  /// calls that fell back to a snapshot lookup.
  std::uint64_t rq_restarts = 0;
  std::uint64_t contains_fallbacks = 0;

  std::vector<Timestamp> cleanup_thresholds;
  std::size_t entries_reclaimed = 0;
  /// Structural invariants checked after the workers stop; empty when valid.
  std::string invariant_errors;
  /// Allocation totals once the structure and its limbo bags are gone.
  AllocationAudit::Totals audit{};

  [[nodiscard]] std::size_t violations() const noexcept {
    return validation ? validation->total_violations() : 0;
  }
  [[nodiscard]] bool thresholds_monotonic() const noexcept;
};

/// Prefills the configured structure with half the key range, runs the
/// worker threads and, when asked, validates the merged logs.
/// Throws std::invalid_argument for a bad configuration.
[[nodiscard]] RunStats run_workload(const WorkloadConfig& config, std::size_t trial = 0, RunOptions options = {});

}  // namespace bundled::harness
