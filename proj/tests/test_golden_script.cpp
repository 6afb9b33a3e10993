#include <doctest.h>

#include "bundled/harness/selftest.hpp"

namespace h = bundled::harness;

TEST_CASE("golden script on every structure") {
  for (auto kind : {h::StructureKind::list, h::StructureKind::skiplist, h::StructureKind::bst}) {
    CAPTURE(h::to_string(kind));
    const auto r = h::run_golden_script(kind);
    INFO(r.bundle_table);
    CHECK(r.bundles_match);
    CHECK(r.snapshots_match);
    CHECK(r.validation.ok());
  }
}
