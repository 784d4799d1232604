#include "hmax/heisenberg.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace hmax {

GroupParams::GroupParams(int n_, Coord mu_) : n(n_), mu(mu_) {
  if (n < 1) throw std::invalid_argument("GroupParams: n must be >= 1");
}

LatticePoint::LatticePoint(Coords coords) : c(std::move(coords)) {
  if (c.size() < 3 || c.size() % 2 == 0)
    throw std::invalid_argument("LatticePoint: needs 2n+1 coordinates");
}

LatticePoint LatticePoint::identity(int n) {
  return LatticePoint(Coords(2 * n + 1, 0));
}

LatticePoint group_mul(const LatticePoint& a, const LatticePoint& b,
                       const GroupParams& params) {
  if (a.n() != params.n || b.n() != params.n)
    throw std::invalid_argument("group_mul: dimension mismatch");
  const int n = params.n;
  Coords out(2 * n + 1);
  // u.eta - v.xi, exactly
  Coord twist = 0;
  for (int i = 0; i < n; ++i) {
    out[i] = checked_add(a.u(i), b.u(i));
    out[n + i] = checked_add(a.v(i), b.v(i));
    twist = checked_add(twist, checked_mul(a.u(i), b.v(i)));
    twist = checked_add(twist, -checked_mul(a.v(i), b.u(i)));
  }
  out[2 * n] =
      checked_add(checked_add(a.t(), b.t()), checked_mul(params.mu, twist));
  return LatticePoint(std::move(out));
}

LatticePoint group_inv(const LatticePoint& a) {
  Coords out(a.c.size());
  for (std::size_t i = 0; i < a.c.size(); ++i) {
    if (a.c[i] == std::numeric_limits<Coord>::min())
      throw std::overflow_error("group_inv: negation overflow");
    out[i] = -a.c[i];
  }
  return LatticePoint(std::move(out));
}

Coord twist_shift(std::span<const Coord> base_u, std::span<const Coord> base_v,
                  std::span<const Coord> xi, std::span<const Coord> eta,
                  const GroupParams& params) {
  Coord s = 0;
  for (int i = 0; i < params.n; ++i) {
    s = checked_add(s, checked_mul(base_u[i], eta[i]));
    s = checked_add(s, -checked_mul(base_v[i], xi[i]));
  }
  return checked_mul(params.mu, s);
}

ScalarField shear_field(const ScalarField& f, std::span<const Coord> base_u,
                        std::span<const Coord> base_v,
                        const GroupParams& params) {
  const int n = params.n;
  const int d = 2 * n + 1;
  if (f.window.dims() != d ||
      static_cast<int>(base_u.size()) != n ||
      static_cast<int>(base_v.size()) != n)
    throw std::invalid_argument("shear_field: dimension mismatch");

  // The shift is linear in (xi, eta), so its extremes over the window
  // are attained at per-axis endpoints (cell indices lo and hi-1).
  Coord max_abs = 0;
  {
    const unsigned combos = 1u << (d - 1);
    Coords xi(n), eta(n);
    for (unsigned mask = 0; mask < combos; ++mask) {
      for (int i = 0; i < n; ++i)
        xi[i] = (mask & (1u << i)) ? f.window.lo[i] : f.window.hi[i] - 1;
      for (int i = 0; i < n; ++i)
        eta[i] =
            (mask & (1u << (n + i))) ? f.window.lo[n + i] : f.window.hi[n + i] - 1;
      Coord s = twist_shift(base_u, base_v, xi, eta, params);
      max_abs = std::max(max_abs, s < 0 ? -s : s);
    }
  }

  Coords lo(f.window.lo), hi(f.window.hi);
  lo[d - 1] = checked_add(lo[d - 1], -max_abs);
  hi[d - 1] = checked_add(hi[d - 1], max_abs);
  ScalarField g{Rect(std::move(lo), std::move(hi))};

  // Columns are contiguous (t is the fastest axis): shift each one.
  const std::size_t t_in = static_cast<std::size_t>(f.extent(d - 1));
  const Coord g_lo_t = g.window.lo[d - 1];
  const std::size_t ncols = f.values.size() / t_in;
  const std::size_t t_out = static_cast<std::size_t>(g.extent(d - 1));

  Coords col(d - 1);
  for (int i = 0; i < d - 1; ++i) col[i] = f.window.lo[i];
  for (std::size_t ci = 0; ci < ncols; ++ci) {
    Coord s = twist_shift(base_u, base_v,
                          std::span<const Coord>(col.data(), n),
                          std::span<const Coord>(col.data() + n, n), params);
    // g(.,tau) = f(.,tau+s): column support becomes [lo_t - s, hi_t - s)
    Coord dst_start = checked_add(f.window.lo[d - 1], -s) - g_lo_t;
    const double* src = f.values.data() + ci * t_in;
    double* dst = g.values.data() + ci * t_out + static_cast<std::size_t>(dst_start);
    std::copy(src, src + t_in, dst);
    for (int i = d - 2; i >= 0; --i) {
      if (++col[i] < f.window.hi[i]) break;
      col[i] = f.window.lo[i];
    }
  }
  return g;
}

}  // namespace hmax
