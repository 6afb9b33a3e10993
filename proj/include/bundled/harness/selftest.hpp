#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bundled/harness/oracle.hpp"
#include "bundled/harness/workload.hpp"

namespace bundled::harness {

struct SelftestResult {
  StructureKind ds;
  /// Range query results at snapshots 0..4 over [0, 100].
  std::vector<std::vector<Key>> snapshots;
  /// Human-readable bundle table after the script.
  std::string bundle_table;
  bool bundles_match = false;
  bool snapshots_match = false;
  ValidationReport validation;

  [[nodiscard]] bool ok() const noexcept { return bundles_match && snapshots_match && validation.ok(); }
};

/// Replays insert(20), insert(30), insert(10), remove(20) on one thread,
/// then reads the structure at every timestamp 0..4.
[[nodiscard]] SelftestResult run_golden_script(StructureKind ds);

/// Runs the script on all three structures and prints each bundle table.
/// Returns true when every structure matches.
bool run_selftest(std::ostream& out);

}  // namespace bundled::harness
