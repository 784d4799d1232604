#ifndef HMAX_SELFTEST_HPP
#define HMAX_SELFTEST_HPP

#include <string>

namespace hmax {

// Fixed-seed invariant sweep over every module: group axioms, prefix
// and union-volume oracles, maximal kernel equivalences, covering
// invariants, analysis determinism, serialization roundtrips. The
// summary has one "suite: passed/total" line per suite and a final
// verdict line; output is deterministic byte for byte.
struct SelftestResult {
  std::string summary;
  int failures = 0;
};

SelftestResult run_selftest();

}  // namespace hmax

#endif  // HMAX_SELFTEST_HPP
