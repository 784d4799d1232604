#ifndef HMAX_ANALYSIS_HPP
#define HMAX_ANALYSIS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmax/heisenberg.hpp"
#include "hmax/lattice.hpp"
#include "hmax/maximal.hpp"

// Experiment harness for the mapping-property measurements: exponent
// pairs, level sets of maximal fields, weak-type and strong-norm
// ratios on truncated windows, and reproducible test-field generation.

namespace hmax {

// SplitMix64 with the standard constants. The stream is part of the
// reproducibility contract: field generation must not drift across
// platforms or standard-library versions.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  std::uint64_t below(std::uint64_t m) { return next() % m; }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Exponent pair 1 < p <= q < inf with alpha = 1/p - 1/q; construction
// rechecks the identity 1 - alpha - (p-1)/p = 1/q to 1e-15.
struct ExponentPair {
  double p;
  double q;
  Alpha alpha;

  ExponentPair(double p_, double q_);
};

struct LevelSet {
  double lambda;
  Coord volume;
};

// Cells of m.base with value strictly above lambda (lambda > 0).
LevelSet level_set_volume(const MaximalField& m, double lambda);

enum class FieldKind { spikes, rect_union_indicator, uniform_noise, smooth_bump };

// Deterministic test-field recipe. Text form
// "kind=spikes;n=1;size=8;k=16;seed=42"; every key but kind may be
// omitted. Fields come from SplitMix64 streams, so the same spec gives
// a bit-identical field on every platform.
struct FieldSpec {
  FieldKind kind = FieldKind::spikes;
  int n = 1;               // ambient dimension d = 2n+1
  Coord size = 8;          // window [0,size)^d
  int k = 16;              // spike count / rectangle count, by kind
  std::uint64_t seed = 0;

  static FieldSpec parse(const std::string& text);
  std::string to_string() const;
};

ScalarField generate_field(const FieldSpec& spec);

// Evaluation window for the ratio experiments: the support hull
// dilated by an odd per-axis factor. The exact kernel runs only when
// the window has at most kExactCellCap cells; larger windows use the
// shifted-dyadic kernel.
inline constexpr Coord kExactCellCap = 4096;
Rect ratio_window(const ScalarField& f, int factor);

// Distinct positive values of m, subsampled to at most cap quantiles
// (largest always kept), each moved one ulp down: the sup of
// lambda * vol{M > lambda}^s over all lambda lives at those left
// limits of the attained values.
std::vector<double> default_lambda_grid(const ScalarField& m,
                                        std::size_t cap = 256);

struct WeakTypeResult {
  double ratio;        // sup over the grid, corrected in dyadic mode
  double lambda_star;  // grid point attaining the sup
  EvalMode mode;
  Rect window;
};

// Measured weak-type constant on one instance: the sup over the lambda
// grid of lambda * vol{M_alpha f > lambda}^(1/q) / ||f||_p. An empty
// grid means default_lambda_grid of the computed field. In dyadic mode
// the sup is multiplied by dyadic_gap_factor, which certifies it as an
// upper bound for the exact-mode value of every grid point.
WeakTypeResult weak_type_ratio(const ScalarField& f, const ExponentPair& exps,
                               const GroupParams& params,
                               std::span<const double> lambda_grid = {},
                               int window_factor = 3);

struct StrongNormResult {
  double ratio;  // ||M_alpha f||_q on the window over ||f||_p
  EvalMode mode;
  Rect window;
};

// Window-truncated lower bound for the strong-norm ratio; the dyadic
// kernel only lowers it, so the bound survives either mode.
StrongNormResult strong_norm_ratio(const ScalarField& f,
                                   const ExponentPair& exps,
                                   const GroupParams& params,
                                   int window_factor = 3);

}  // namespace hmax

#endif  // HMAX_ANALYSIS_HPP
