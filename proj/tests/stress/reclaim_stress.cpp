// Reclamation stress run, built once per sanitizer. Exits non-zero when the
// run reports violations, broken invariants, an unbalanced allocation audit
// or a decreasing cleanup threshold; the sanitizer adds its own reports.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "bundled/harness/runner.hpp"

namespace h = bundled::harness;

int main(int argc, char** argv) {
  CLI::App app{"Cleanup and reclamation under concurrent load"};
  std::string ds = "list";
  h::WorkloadConfig config;
  config.threads = 8;
  config.duration_s = 3.0;
  config.mix = h::Mix{50, 40, 10};
  config.validate = true;
  config.cleanup = true;
  std::optional<bundled::Key> key_range;
  app.add_option("--ds", ds, "list, skiplist or bst")->capture_default_str();
  app.add_option("--threads", config.threads)->capture_default_str();
  app.add_option("--duration-s", config.duration_s)->capture_default_str();
  app.add_option("--key-range", key_range);
  app.add_option("--seed", config.seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const auto kind = h::parse_structure(ds);
  if (!kind) {
    std::cerr << "unknown structure " << ds << '\n';
    return 2;
  }
  config.ds = *kind;
  config.key_range = key_range.value_or(*kind == h::StructureKind::list ? 10'000 : 100'000);

  const auto s = h::run_workload(config);
  const bool balanced = s.audit.live_nodes() == 0 && s.audit.live_entries() == 0;
  std::cout << ds << ": " << s.total_ops << " ops, violations=" << s.violations()
            << ", nodes " << s.audit.nodes_allocated << '/' << s.audit.nodes_freed << ", entries "
            << s.audit.entries_allocated << '/' << s.audit.entries_freed << ", cleanup passes "
            << s.cleanup_thresholds.size() << ", entries reclaimed " << s.entries_reclaimed
            << ", thresholds " << (s.thresholds_monotonic() ? "non-decreasing" : "DECREASING") << '\n';
  if (!s.invariant_errors.empty()) std::cout << "invariant errors: " << s.invariant_errors << '\n';
  const bool ok = s.violations() == 0 && s.invariant_errors.empty() && balanced && s.thresholds_monotonic() &&
                  !s.cleanup_thresholds.empty();
  return ok ? 0 : 1;
}
