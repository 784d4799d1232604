#ifndef HMAX_LATTICE_HPP
#define HMAX_LATTICE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Finite-lattice substrate: dense scalar fields on integer windows,
// axis-parallel half-open boxes, O(1) box sums via (2n+1)-dimensional
// prefix tables, exact union volumes by coordinate compression, and
// L^p norms with unit cell measure.

namespace hmax {

using Coord = std::int64_t;
using Coords = std::vector<Coord>;

// Checked 64-bit arithmetic. Silent wrap would corrupt the integer
// invariants invisibly, so every potentially large product goes
// through these.
Coord checked_add(Coord a, Coord b);
Coord checked_mul(Coord a, Coord b);

// Ambient dimension bookkeeping: d = 2n+1 with n >= 1.
struct Dim {
  int n;
  explicit Dim(int n_);
  int d() const { return 2 * n + 1; }
};

// Half-open integer box prod_i [lo_i, hi_i), nonempty on every axis.
struct Rect {
  Coords lo;
  Coords hi;

  Rect(Coords lo_, Coords hi_);  // validates lo_i < hi_i
  int dims() const { return static_cast<int>(lo.size()); }
  Coord extent(int axis) const { return hi[axis] - lo[axis]; }
  Coord volume() const;  // prod of extents, overflow-checked
  bool contains(std::span<const Coord> p) const;
  bool contains_rect(const Rect& r) const;
  bool operator==(const Rect& o) const { return lo == o.lo && hi == o.hi; }

  static std::optional<Rect> intersect(const Rect& a, const Rect& b);
  static Rect hull(const Rect& a, const Rect& b);
  // Smallest box containing r and the unit cell at p.
  static Rect hull_cell(const Rect& r, std::span<const Coord> p);
};

// Window grown to `factor` times its extent per axis (factor odd),
// keeping the original centered: pad = extent*(factor-1)/2 each side.
Rect dilated(const Rect& r, int factor);

// Dense real values on the cells of `window`; identically 0 outside.
// Row-major storage, last axis fastest.
struct ScalarField {
  Rect window;
  std::vector<double> values;

  explicit ScalarField(Rect w, double fill = 0.0);

  Coord extent(int axis) const { return window.extent(axis); }
  std::size_t size() const { return values.size(); }
  std::size_t linear_index(std::span<const Coord> p) const;

  double at(std::span<const Coord> p) const;  // 0 outside window
  double& ref(std::span<const Coord> p);      // p must be inside

  // Tight bounding box of the nonzero cells; nullopt when f == 0.
  std::optional<Rect> support_hull() const;
  // Copy of the values restricted to r (r must be inside the window).
  ScalarField restricted_to(const Rect& r) const;
};

// Equal as functions Z^d -> R (windows may differ; outside reads are 0).
// tol is absolute; tol = 0 demands exact equality.
bool fields_equal(const ScalarField& a, const ScalarField& b, double tol);

// Compensated (Neumaier) accumulator. d-dimensional inclusion-exclusion
// amplifies cancellation, so prefix tables and norms accumulate through
// this rather than bare doubles.
struct CompensatedSum {
  double s = 0.0;
  double c = 0.0;
  void add(double x);
  double value() const { return s + c; }
};

// Inclusion-exclusion prefix sums over the field window. rect_sum
// answers any box query in O(2^d); boxes reaching outside the window
// contribute 0 there.
class PrefixSumTable {
 public:
  PrefixSumTable(const ScalarField& f, bool absolute);

  const Rect& window() const { return window_; }
  double rect_sum(const Rect& r) const;
  // Same query without building a Rect (hot paths); lo/hi need not be
  // ordered or inside the window, the box is clamped like rect_sum.
  double rect_sum(std::span<const Coord> lo, std::span<const Coord> hi) const;

  // Low-level access for the evaluation kernels: cumulative array over
  // the (extent+1)-padded grid, row-major, last axis fastest (stride 1).
  const double* data() const { return cum_.data(); }
  std::size_t stride(int axis) const { return stride_[axis]; }
  // Clamp an absolute coordinate on `axis` into [0, extent] grid units.
  std::size_t clamp_index(int axis, Coord x) const;

 private:
  Rect window_;
  std::vector<std::size_t> stride_;
  std::vector<double> cum_;
};

// Exact counting volume of a union of boxes by coordinate compression:
// each axis is compressed to its sorted distinct endpoints, covered
// compressed cells are marked, and their true volumes accumulated.
Coord union_volume(std::span<const Rect> rects);

// (sum_cells |v|^p)^(1/p) with unit cell measure; requires p >= 1.
double lp_norm(const ScalarField& f, double p);

}  // namespace hmax

#endif  // HMAX_LATTICE_HPP
