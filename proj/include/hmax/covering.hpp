#ifndef HMAX_COVERING_HPP
#define HMAX_COVERING_HPP

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "hmax/lattice.hpp"

// Greedy half-overlap selection over an ordered rectangle list, plus
// exact verifiers for what the selection certifies: the skip bound on
// rejected rectangles, the disjoint-core bound on kept ones, the
// pointwise half-bound for the strong maximal function of the kept
// union, and the union-volume / overlap-norm ratios.

namespace hmax {

enum class Decision : std::uint8_t { selected, skipped };

// Decision record for one input rectangle. overlap is the exact
// integer volume of its intersection with the union of the rectangles
// kept before it.
struct AuditEntry {
  Coord overlap;
  Decision decision;
};

// One selection pass over `input` (order preserved). `selected` holds
// strictly increasing indices into `input`; index 0 is always kept.
// Kept entries satisfy 2*overlap <= vol, skipped ones 2*overlap > vol.
struct Selection {
  std::vector<Rect> input;
  std::vector<std::size_t> selected;
  std::vector<AuditEntry> audit;

  std::vector<Rect> selected_rects() const;
};

// Left-to-right pass keeping a rectangle iff at most half of its
// volume is already covered by previously kept ones; exact half keeps.
// Deterministic in the input order, and appending inputs never changes
// decisions on the existing prefix.
Selection cf_select(std::span<const Rect> rects);

// Per-cell count of covering rectangles as a dense field on `window`.
// Every rectangle must lie inside the window.
ScalarField overlap_field(std::span<const Rect> rects, const Rect& window);

struct CoveringReport {
  // vol(union of all inputs) / vol(union of kept), always >= 1.
  double est1_ratio = 1.0;
  // p -> ||sum of kept indicators||_p / vol(union of kept)^(1/p),
  // always >= 1 since the count dominates the union indicator.
  std::map<double, double> est2_ratios;
  bool half_bound_ok = false;
  bool disjoint_core_ok = false;
  // Kept rectangles whose fresh part is exactly half their volume.
  // The keep rule admits such ties, and only there does the strict
  // core bound degrade to equality; callers that need the strict form
  // require core_tie_count == 0.
  std::size_t core_tie_count = 0;
};

// Recomputes every audit overlap from scratch and throws if `sel` is
// not what cf_select produces on `rects`. half_bound_ok: every input
// R_j has 2*vol(R_j inter union of kept) > vol(R_j), an exact integer
// comparison; since some R_j contains any given cell of the input
// union, this witnesses M_0 of the kept-union indicator > 1/2 there.
// disjoint_core_ok: every kept rectangle's fresh part is at least half
// its volume, with ties counted in core_tie_count.
CoveringReport verify_selection(std::span<const Rect> rects,
                                const Selection& sel);

// Fills est1_ratio and est2_ratios (entries of p_list must lie in
// (1, inf)). The overlap norm is computed exactly on the compressed
// grid of the kept rectangles: per compressed cell the count is
// constant, so ||sum chi||_p^p = sum count^p * cellvol.
CoveringReport est_ratios(std::span<const Rect> rects, const Selection& sel,
                          std::span<const double> p_list);

}  // namespace hmax

#endif  // HMAX_COVERING_HPP
