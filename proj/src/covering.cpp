#include "hmax/covering.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace hmax {

namespace {

// Exact volume of r's intersection with the union of `others`.
Coord overlap_volume(const Rect& r, std::span<const Rect> others) {
  std::vector<Rect> parts;
  parts.reserve(others.size());
  for (const Rect& o : others)
    if (auto s = Rect::intersect(r, o)) parts.push_back(*s);
  if (parts.empty()) return 0;
  return union_volume(parts);
}

void check_dims(std::span<const Rect> rects, const char* who) {
  const int d = rects[0].dims();
  for (const Rect& r : rects)
    if (r.dims() != d)
      throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

}  // namespace

std::vector<Rect> Selection::selected_rects() const {
  std::vector<Rect> out;
  out.reserve(selected.size());
  for (std::size_t k : selected) out.push_back(input[k]);
  return out;
}

Selection cf_select(std::span<const Rect> rects) {
  if (rects.empty())
    throw std::invalid_argument("cf_select: empty rectangle list");
  check_dims(rects, "cf_select");

  Selection sel;
  sel.input.assign(rects.begin(), rects.end());
  sel.audit.reserve(rects.size());
  std::vector<Rect> kept;
  for (std::size_t j = 0; j < rects.size(); ++j) {
    const Coord ov = overlap_volume(rects[j], kept);
    const bool keep = checked_mul(2, ov) <= rects[j].volume();
    sel.audit.push_back({ov, keep ? Decision::selected : Decision::skipped});
    if (keep) {
      sel.selected.push_back(j);
      kept.push_back(rects[j]);
    }
  }
  return sel;
}

ScalarField overlap_field(std::span<const Rect> rects, const Rect& window) {
  for (const Rect& r : rects) {
    if (r.dims() != window.dims())
      throw std::invalid_argument("overlap_field: dimension mismatch");
    if (!window.contains_rect(r))
      throw std::invalid_argument("overlap_field: rectangle outside window");
  }
  ScalarField out(window);
  const int d = window.dims();
  Coords p(d);
  for (const Rect& r : rects) {
    for (int i = 0; i < d; ++i) p[i] = r.lo[i];
    for (;;) {
      out.ref(p) += 1.0;
      int i = d - 1;
      for (; i >= 0; --i) {
        if (++p[i] < r.hi[i]) break;
        p[i] = r.lo[i];
      }
      if (i < 0) break;
    }
  }
  return out;
}

CoveringReport verify_selection(std::span<const Rect> rects,
                                const Selection& sel) {
  const std::size_t m = rects.size();
  auto mismatch = [] {
    throw std::invalid_argument(
        "verify_selection: selection does not match rectangles");
  };
  if (m == 0 || sel.input.size() != m || sel.audit.size() != m) mismatch();
  for (std::size_t j = 0; j < m; ++j)
    if (!(sel.input[j] == rects[j])) mismatch();

  // Replay the pass, holding the audit to the half rule cell by cell.
  std::vector<Rect> kept;
  std::vector<std::size_t> kept_idx;
  for (std::size_t j = 0; j < m; ++j) {
    const Coord vol = rects[j].volume();
    const Coord ov = overlap_volume(rects[j], kept);
    const bool keep = checked_mul(2, ov) <= vol;
    if (sel.audit[j].overlap != ov) mismatch();
    const Decision want = keep ? Decision::selected : Decision::skipped;
    if (sel.audit[j].decision != want) mismatch();
    if (keep) {
      kept.push_back(rects[j]);
      kept_idx.push_back(j);
    }
  }
  if (kept_idx != sel.selected) mismatch();

  CoveringReport rep;

  // Fresh part of each kept rectangle is at least half its volume; the
  // keep rule makes equality possible, so ties are counted, not failed.
  rep.disjoint_core_ok = true;
  for (std::size_t k : kept_idx) {
    const Coord vol = rects[k].volume();
    const Coord twice_core = checked_mul(2, vol - sel.audit[k].overlap);
    if (twice_core < vol) rep.disjoint_core_ok = false;
    if (twice_core == vol) ++rep.core_tie_count;
  }

  // Against the final kept union the overlap can only have grown, so
  // every input (kept or skipped) covers any of its cells with a box
  // holding strictly more than half kept-union mass.
  rep.half_bound_ok = true;
  for (std::size_t j = 0; j < m; ++j) {
    const Coord mass = overlap_volume(rects[j], kept);
    if (checked_mul(2, mass) <= rects[j].volume()) rep.half_bound_ok = false;
  }
  return rep;
}

CoveringReport est_ratios(std::span<const Rect> rects, const Selection& sel,
                          std::span<const double> p_list) {
  for (double p : p_list)
    if (!std::isfinite(p) || !(p > 1.0))
      throw std::invalid_argument("est_ratios: p must lie in (1, inf)");

  CoveringReport rep;
  const std::vector<Rect> kept = sel.selected_rects();
  const Coord u_all = union_volume(rects);
  const Coord u_kept = union_volume(kept);
  rep.est1_ratio =
      static_cast<double>(u_all) / static_cast<double>(u_kept);
  if (p_list.empty()) return rep;

  // Compressed grid of the kept family: the count of covering
  // rectangles is constant on each compressed cell. Counts come from a
  // d-dimensional difference array (corner +/-1 per rectangle, then a
  // prefix pass per axis).
  const int d = kept[0].dims();
  std::vector<std::vector<Coord>> cuts(d);
  for (int i = 0; i < d; ++i) {
    for (const Rect& r : kept) {
      cuts[i].push_back(r.lo[i]);
      cuts[i].push_back(r.hi[i]);
    }
    std::sort(cuts[i].begin(), cuts[i].end());
    cuts[i].erase(std::unique(cuts[i].begin(), cuts[i].end()), cuts[i].end());
  }
  // Padded one past the cells so the hi corner of a rectangle that
  // reaches the last cut still has a slot.
  std::vector<std::size_t> ncell(d), pad(d), stride(d, 1);
  for (int i = 0; i < d; ++i) {
    ncell[i] = cuts[i].size() - 1;
    pad[i] = ncell[i] + 1;
  }
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * pad[i + 1];
  const std::size_t total = stride[0] * pad[0];
  std::vector<int> diff(total, 0);

  auto cut_index = [&](int axis, Coord x) {
    return static_cast<std::size_t>(
        std::lower_bound(cuts[axis].begin(), cuts[axis].end(), x) -
        cuts[axis].begin());
  };
  std::vector<std::size_t> a(d), b(d);
  for (const Rect& r : kept) {
    for (int i = 0; i < d; ++i) {
      a[i] = cut_index(i, r.lo[i]);
      b[i] = cut_index(i, r.hi[i]);
    }
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      std::size_t idx = 0;
      for (int i = 0; i < d; ++i)
        idx += stride[i] * ((mask >> i) & 1u ? b[i] : a[i]);
      diff[idx] += (std::popcount(mask) & 1) ? -1 : 1;
    }
  }
  for (int axis = 0; axis < d; ++axis) {
    const std::size_t s = stride[axis];
    const std::size_t n = pad[axis];
    for (std::size_t idx = 0; idx < total; ++idx)
      if ((idx / s) % n > 0) diff[idx] += diff[idx - s];
  }

  std::vector<CompensatedSum> sum_p(p_list.size());
  std::vector<std::size_t> it(d, 0);
  for (;;) {
    std::size_t idx = 0;
    for (int i = 0; i < d; ++i) idx += stride[i] * it[i];
    const int c = diff[idx];
    if (c > 0) {
      double cellvol = 1.0;
      for (int i = 0; i < d; ++i)
        cellvol *= static_cast<double>(cuts[i][it[i] + 1] - cuts[i][it[i]]);
      for (std::size_t k = 0; k < p_list.size(); ++k)
        sum_p[k].add(std::pow(static_cast<double>(c), p_list[k]) * cellvol);
    }
    int i = d - 1;
    for (; i >= 0; --i) {
      if (++it[i] < ncell[i]) break;
      it[i] = 0;
    }
    if (i < 0) break;
  }
  for (std::size_t k = 0; k < p_list.size(); ++k)
    rep.est2_ratios[p_list[k]] = std::pow(
        sum_p[k].value() / static_cast<double>(u_kept), 1.0 / p_list[k]);
  return rep;
}

}  // namespace hmax
