#ifndef HMAX_HEISENBERG_HPP
#define HMAX_HEISENBERG_HPP

#include "hmax/lattice.hpp"

// Group law on the integer Heisenberg lattice Z^n x Z^n x Z:
//
//   (u,v,t) * (xi,eta,tau) = (u+xi, v+eta, t+tau + mu*(u.eta - v.xi))
//
// and the shear that turns the twisted maximal operator at a base point
// (u,v) into a classical strong maximal computation: each (xi,eta)
// column of the field is shifted in tau by the exact integer
// mu*(u.eta - v.xi).
//
// mu is restricted to integers so every twist is an exact lattice
// shift. A rational mu = a/b is representable by refining the tau axis
// by a factor b; that refinement is not implemented.

namespace hmax {

struct GroupParams {
  int n;
  Coord mu;
  GroupParams(int n_, Coord mu_);
  int d() const { return 2 * n + 1; }
};

// (u, v, t) with u, v in Z^n and t in Z. Stored flat: u_1..u_n,
// v_1..v_n, t, the same axis order the fields use (t last, fastest).
struct LatticePoint {
  Coords c;

  explicit LatticePoint(Coords coords);
  static LatticePoint identity(int n);

  int n() const { return (static_cast<int>(c.size()) - 1) / 2; }
  Coord u(int i) const { return c[i]; }
  Coord v(int i) const { return c[n() + i]; }
  Coord t() const { return c.back(); }

  bool operator==(const LatticePoint& o) const { return c == o.c; }
};

LatticePoint group_mul(const LatticePoint& a, const LatticePoint& b,
                       const GroupParams& params);
LatticePoint group_inv(const LatticePoint& a);

// Twist shift mu*(base_u . eta - base_v . xi) for the column (xi, eta).
Coord twist_shift(std::span<const Coord> base_u, std::span<const Coord> base_v,
                  std::span<const Coord> xi, std::span<const Coord> eta,
                  const GroupParams& params);

// g(xi,eta,tau) = f(xi,eta, tau + mu*(base_u.eta - base_v.xi)).
// The output window keeps f's (xi,eta) range and widens the tau range
// on both sides by the maximum |shift| over the (xi,eta) window, so no
// shifted mass falls outside; vacated cells are zero.
ScalarField shear_field(const ScalarField& f, std::span<const Coord> base_u,
                        std::span<const Coord> base_v,
                        const GroupParams& params);

}  // namespace hmax

#endif  // HMAX_HEISENBERG_HPP
