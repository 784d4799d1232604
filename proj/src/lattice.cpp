#include "hmax/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace hmax {

Coord checked_add(Coord a, Coord b) {
  Coord r;
  if (__builtin_add_overflow(a, b, &r))
    throw std::overflow_error("integer overflow in add");
  return r;
}

Coord checked_mul(Coord a, Coord b) {
  Coord r;
  if (__builtin_mul_overflow(a, b, &r))
    throw std::overflow_error("integer overflow in mul");
  return r;
}

Dim::Dim(int n_) : n(n_) {
  if (n < 1) throw std::invalid_argument("Dim: n must be >= 1");
}

Rect::Rect(Coords lo_, Coords hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size() || lo.empty())
    throw std::invalid_argument("Rect: lo/hi size mismatch");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (lo[i] >= hi[i]) throw std::invalid_argument("Rect: empty on some axis");
}

Coord Rect::volume() const {
  Coord v = 1;
  for (int i = 0; i < dims(); ++i) v = checked_mul(v, extent(i));
  return v;
}

bool Rect::contains(std::span<const Coord> p) const {
  if (static_cast<int>(p.size()) != dims()) return false;
  for (int i = 0; i < dims(); ++i)
    if (p[i] < lo[i] || p[i] >= hi[i]) return false;
  return true;
}

bool Rect::contains_rect(const Rect& r) const {
  for (int i = 0; i < dims(); ++i)
    if (r.lo[i] < lo[i] || r.hi[i] > hi[i]) return false;
  return true;
}

std::optional<Rect> Rect::intersect(const Rect& a, const Rect& b) {
  if (a.dims() != b.dims())
    throw std::invalid_argument("Rect::intersect: dimension mismatch");
  Coords lo(a.dims()), hi(a.dims());
  for (int i = 0; i < a.dims(); ++i) {
    lo[i] = std::max(a.lo[i], b.lo[i]);
    hi[i] = std::min(a.hi[i], b.hi[i]);
    if (lo[i] >= hi[i]) return std::nullopt;
  }
  return Rect(std::move(lo), std::move(hi));
}

Rect Rect::hull(const Rect& a, const Rect& b) {
  if (a.dims() != b.dims())
    throw std::invalid_argument("Rect::hull: dimension mismatch");
  Coords lo(a.dims()), hi(a.dims());
  for (int i = 0; i < a.dims(); ++i) {
    lo[i] = std::min(a.lo[i], b.lo[i]);
    hi[i] = std::max(a.hi[i], b.hi[i]);
  }
  return Rect(std::move(lo), std::move(hi));
}

Rect Rect::hull_cell(const Rect& r, std::span<const Coord> p) {
  Coords lo(r.lo), hi(r.hi);
  for (int i = 0; i < r.dims(); ++i) {
    lo[i] = std::min(lo[i], p[i]);
    hi[i] = std::max(hi[i], p[i] + 1);
  }
  return Rect(std::move(lo), std::move(hi));
}

Rect dilated(const Rect& r, int factor) {
  if (factor < 1 || factor % 2 == 0)
    throw std::invalid_argument("dilated: factor must be odd and >= 1");
  Coords lo(r.lo), hi(r.hi);
  for (int i = 0; i < r.dims(); ++i) {
    Coord pad = checked_mul(r.extent(i), (factor - 1) / 2);
    lo[i] = checked_add(lo[i], -pad);
    hi[i] = checked_add(hi[i], pad);
  }
  return Rect(std::move(lo), std::move(hi));
}

ScalarField::ScalarField(Rect w, double fill)
    : window(std::move(w)),
      values(static_cast<std::size_t>(window.volume()), fill) {}

std::size_t ScalarField::linear_index(std::span<const Coord> p) const {
  std::size_t idx = 0;
  for (int i = 0; i < window.dims(); ++i)
    idx = idx * static_cast<std::size_t>(window.extent(i)) +
          static_cast<std::size_t>(p[i] - window.lo[i]);
  return idx;
}

double ScalarField::at(std::span<const Coord> p) const {
  if (!window.contains(p)) return 0.0;
  return values[linear_index(p)];
}

double& ScalarField::ref(std::span<const Coord> p) {
  if (!window.contains(p))
    throw std::out_of_range("ScalarField::ref: point outside window");
  return values[linear_index(p)];
}

std::optional<Rect> ScalarField::support_hull() const {
  const int d = window.dims();
  Coords lo(d), hi(d);
  bool any = false;
  Coords p(window.lo);
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    if (values[idx] != 0.0) {
      if (!any) {
        lo = p;
        hi = p;
        any = true;
      } else {
        for (int i = 0; i < d; ++i) {
          lo[i] = std::min(lo[i], p[i]);
          hi[i] = std::max(hi[i], p[i]);
        }
      }
    }
    // odometer step, last axis fastest
    for (int i = d - 1; i >= 0; --i) {
      if (++p[i] < window.hi[i]) break;
      p[i] = window.lo[i];
    }
  }
  if (!any) return std::nullopt;
  for (int i = 0; i < d; ++i) ++hi[i];
  return Rect(std::move(lo), std::move(hi));
}

ScalarField ScalarField::restricted_to(const Rect& r) const {
  if (!window.contains_rect(r))
    throw std::invalid_argument("restricted_to: rect not inside window");
  ScalarField out(r);
  Coords p(r.lo);
  for (std::size_t idx = 0; idx < out.values.size(); ++idx) {
    out.values[idx] = values[linear_index(p)];
    for (int i = r.dims() - 1; i >= 0; --i) {
      if (++p[i] < r.hi[i]) break;
      p[i] = r.lo[i];
    }
  }
  return out;
}

bool fields_equal(const ScalarField& a, const ScalarField& b, double tol) {
  if (a.window.dims() != b.window.dims()) return false;
  Rect h = Rect::hull(a.window, b.window);
  Coords p(h.lo);
  const Coord cells = h.volume();
  for (Coord idx = 0; idx < cells; ++idx) {
    double va = a.at(p);
    double vb = b.at(p);
    if (std::abs(va - vb) > tol) return false;
    for (int i = h.dims() - 1; i >= 0; --i) {
      if (++p[i] < h.hi[i]) break;
      p[i] = h.lo[i];
    }
  }
  return true;
}

void CompensatedSum::add(double x) {
  double t = s + x;
  if (std::abs(s) >= std::abs(x))
    c += (s - t) + x;
  else
    c += (x - t) + s;
  s = t;
}

PrefixSumTable::PrefixSumTable(const ScalarField& f, bool absolute)
    : window_(f.window) {
  const int d = window_.dims();
  std::vector<std::size_t> pext(d);
  for (int i = 0; i < d; ++i) pext[i] = static_cast<std::size_t>(window_.extent(i)) + 1;
  stride_.assign(d, 1);
  for (int i = d - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * pext[i + 1];
  const std::size_t total = stride_[0] * pext[0];
  cum_.assign(total, 0.0);

  // Seed values at index+1 on every axis (the 0-planes stay 0).
  {
    Coords p(d, 0);
    for (std::size_t src = 0; src < f.values.size(); ++src) {
      std::size_t dst = 0;
      for (int i = 0; i < d; ++i)
        dst += (static_cast<std::size_t>(p[i]) + 1) * stride_[i];
      cum_[dst] = absolute ? std::abs(f.values[src]) : f.values[src];
      for (int i = d - 1; i >= 0; --i) {
        if (++p[i] < window_.extent(i)) break;
        p[i] = 0;
      }
    }
  }

  // Axis-wise running sums, compensated per line.
  for (int axis = 0; axis < d; ++axis) {
    const std::size_t st = stride_[axis];
    const std::size_t len = pext[axis];
    // iterate all lines: indices with axis-coordinate 0
    std::vector<std::size_t> other;  // strides/extents of the other axes
    std::size_t nlines = 1;
    for (int i = 0; i < d; ++i)
      if (i != axis) nlines *= pext[i];
    Coords idx(d, 0);
    for (std::size_t line = 0; line < nlines; ++line) {
      std::size_t base = 0;
      for (int i = 0; i < d; ++i)
        if (i != axis) base += static_cast<std::size_t>(idx[i]) * stride_[i];
      CompensatedSum acc;
      for (std::size_t k = 0; k < len; ++k) {
        acc.add(cum_[base + k * st]);
        cum_[base + k * st] = acc.value();
      }
      for (int i = d - 1; i >= 0; --i) {
        if (i == axis) continue;
        if (++idx[i] < static_cast<Coord>(pext[i])) break;
        idx[i] = 0;
      }
    }
  }
}

std::size_t PrefixSumTable::clamp_index(int axis, Coord x) const {
  Coord c = std::clamp(x, window_.lo[axis], window_.hi[axis]);
  return static_cast<std::size_t>(c - window_.lo[axis]);
}

double PrefixSumTable::rect_sum(const Rect& r) const {
  if (r.dims() != window_.dims())
    throw std::invalid_argument("rect_sum: dimension mismatch");
  return rect_sum(std::span<const Coord>(r.lo), std::span<const Coord>(r.hi));
}

double PrefixSumTable::rect_sum(std::span<const Coord> rlo,
                                std::span<const Coord> rhi) const {
  const int d = window_.dims();
  constexpr int kMaxDims = 32;
  if (d > kMaxDims) throw std::invalid_argument("rect_sum: too many axes");
  std::size_t a[kMaxDims], b[kMaxDims];
  for (int i = 0; i < d; ++i) {
    a[i] = clamp_index(i, rlo[i]);
    b[i] = clamp_index(i, rhi[i]);
    if (a[i] >= b[i]) return 0.0;
  }
  double sum = 0.0;
  const unsigned corners = 1u << d;
  for (unsigned mask = 0; mask < corners; ++mask) {
    std::size_t idx = 0;
    int par = 0;
    for (int i = 0; i < d; ++i) {
      if (mask & (1u << i)) {
        idx += a[i] * stride_[i];
        ++par;
      } else {
        idx += b[i] * stride_[i];
      }
    }
    sum += (par & 1) ? -cum_[idx] : cum_[idx];
  }
  return sum;
}

Coord union_volume(std::span<const Rect> rects) {
  if (rects.empty())
    throw std::invalid_argument("union_volume: empty rectangle list");
  const int d = rects[0].dims();
  for (const Rect& r : rects)
    if (r.dims() != d)
      throw std::invalid_argument("union_volume: dimension mismatch");

  // Compress each axis to the sorted distinct endpoints.
  std::vector<std::vector<Coord>> cuts(d);
  for (int i = 0; i < d; ++i) {
    for (const Rect& r : rects) {
      cuts[i].push_back(r.lo[i]);
      cuts[i].push_back(r.hi[i]);
    }
    std::sort(cuts[i].begin(), cuts[i].end());
    cuts[i].erase(std::unique(cuts[i].begin(), cuts[i].end()), cuts[i].end());
  }

  std::vector<std::size_t> ncells(d), stride(d, 1);
  for (int i = 0; i < d; ++i) ncells[i] = cuts[i].size() - 1;
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * ncells[i + 1];
  std::vector<char> covered(stride[0] * ncells[0], 0);

  auto cell_of = [&](int axis, Coord x) {
    return static_cast<std::size_t>(
        std::lower_bound(cuts[axis].begin(), cuts[axis].end(), x) -
        cuts[axis].begin());
  };

  // Mark compressed cells covered by each rectangle.
  std::vector<std::size_t> a(d), b(d), it(d);
  for (const Rect& r : rects) {
    for (int i = 0; i < d; ++i) {
      a[i] = cell_of(i, r.lo[i]);
      b[i] = cell_of(i, r.hi[i]);
    }
    it = a;
    while (true) {
      std::size_t base = 0;
      for (int i = 0; i + 1 < d; ++i) base += it[i] * stride[i];
      std::fill(covered.begin() + base + a[d - 1],
                covered.begin() + base + b[d - 1], char(1));
      int i = d - 2;
      for (; i >= 0; --i) {
        if (++it[i] < b[i]) break;
        it[i] = a[i];
      }
      if (i < 0) break;
    }
  }

  // Accumulate true volumes of the covered compressed cells.
  Coord vol = 0;
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t flat = 0; flat < covered.size(); ++flat) {
    if (covered[flat]) {
      Coord v = 1;
      for (int i = 0; i < d; ++i)
        v = checked_mul(v, cuts[i][idx[i] + 1] - cuts[i][idx[i]]);
      vol = checked_add(vol, v);
    }
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[i] < ncells[i]) break;
      idx[i] = 0;
    }
  }
  return vol;
}

double lp_norm(const ScalarField& f, double p) {
  if (!(p >= 1.0) || !std::isfinite(p))
    throw std::invalid_argument("lp_norm: requires finite p >= 1");
  CompensatedSum acc;
  if (p == 1.0) {
    for (double v : f.values) acc.add(std::abs(v));
    return acc.value();
  }
  if (p == 2.0) {
    for (double v : f.values) acc.add(v * v);
    return std::sqrt(acc.value());
  }
  for (double v : f.values)
    if (v != 0.0) acc.add(std::pow(std::abs(v), p));
  return std::pow(acc.value(), 1.0 / p);
}

}  // namespace hmax
