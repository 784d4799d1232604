#ifndef HMAX_MAXIMAL_HPP
#define HMAX_MAXIMAL_HPP

#include <span>
#include <string>
#include <vector>

#include "hmax/heisenberg.hpp"
#include "hmax/lattice.hpp"

// Fractional strong maximal operator on the lattice:
//
//   M_a f(x) = sup_R vol(R)^(a-1) * sum_{y in R} |f(y)|
//
// with R ranging over axis-parallel boxes containing x. Three forms:
// an exact evaluator (the sup reduces to a finite candidate set; the
// reduction lemma is documented in maximal.cpp), a fast evaluator over
// shifted dyadic boxes with the two-sided bound
//
//   fast <= exact <= 4^{d(1-a)} * fast,
//
// and the twisted operator that averages f over group translates,
// computed by shearing each (u,v) column. All field-level kernels
// parallelize over (u,v,..) columns; every column owns a disjoint
// output slice, so results are deterministic regardless of thread
// count.

namespace hmax {

// a = 1/p - 1/q with 1 < p <= q, so a in [0,1).
struct Alpha {
  double value;
  explicit Alpha(double v);
  static Alpha from_exponents(double p, double q);
};

enum class EvalMode { exact, dyadic };
std::string to_string(EvalMode m);
EvalMode parse_eval_mode(const std::string& s);  // throws std::invalid_argument

// 4^{d(1-a)}: certified factor between the dyadic and exact sups.
double dyadic_gap_factor(int d, Alpha alpha);

// Fields with at most this many nonzero cells take the sparse dyadic
// path (per-spike accumulation instead of prefix-table box sums).
inline constexpr std::size_t kSparseMaxNnz = 512;

struct MaximalField {
  ScalarField base;    // M_a f on the query window
  double alpha;
  EvalMode mode;
  GroupParams params;  // mu = 0 for the untwisted kernels
};

// ---- exact, untwisted ----

double maximal_exact_at(const ScalarField& f, Alpha alpha,
                        std::span<const Coord> x);
inline double maximal_exact_at(const ScalarField& f, Alpha alpha,
                               const LatticePoint& x) {
  return maximal_exact_at(f, alpha, std::span<const Coord>(x.c));
}
// One candidate enumeration shared across several alphas.
std::vector<double> maximal_exact_at_multi(const ScalarField& f,
                                           std::span<const Alpha> alphas,
                                           std::span<const Coord> x);

std::vector<ScalarField> maximal_exact_multi(const ScalarField& f,
                                             std::span<const Alpha> alphas,
                                             const Rect& query);
ScalarField maximal_exact_field(const ScalarField& f, Alpha alpha,
                                const Rect& query);

// ---- shifted-dyadic, untwisted ----

// Plain enumeration over the same box family the kernel uses (the
// family is anchored at hull(support, query), so the query must be
// passed to reproduce kernel values). Reference for tests.
double maximal_fast_at(const ScalarField& f, Alpha alpha,
                       std::span<const Coord> x, const Rect& query);

std::vector<ScalarField> maximal_fast_multi(const ScalarField& f,
                                            std::span<const Alpha> alphas,
                                            const Rect& query);
MaximalField maximal_fast(const ScalarField& f, Alpha alpha,
                          const Rect& query);

// ---- twisted ----

// For each (u,v) column of query: shear f by the column's twist, then
// evaluate the classical operator of the sheared field along the
// column. The twist depends only on the evaluation point's (u,v),
// never on the box; that is what makes the column factorization exact.
std::vector<ScalarField> heisenberg_maximal_multi(
    const ScalarField& f, std::span<const Alpha> alphas,
    const GroupParams& params, const Rect& query, EvalMode mode);
MaximalField heisenberg_maximal(const ScalarField& f, Alpha alpha,
                                const GroupParams& params, const Rect& query,
                                EvalMode mode);

// Direct group form: pull f back through y -> x * y^{-1} and take the
// exact classical sup at the origin. Shares no geometry with the shear
// path; the two must agree by the change of variables (tested).
double maximal_group_form_at(const ScalarField& f, Alpha alpha,
                             const GroupParams& params, const LatticePoint& x);
std::vector<double> maximal_group_form_at_multi(const ScalarField& f,
                                                std::span<const Alpha> alphas,
                                                const GroupParams& params,
                                                const LatticePoint& x);

}  // namespace hmax

#endif  // HMAX_MAXIMAL_HPP
