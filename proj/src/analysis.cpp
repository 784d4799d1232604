#include "hmax/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace hmax {

namespace {

double alpha_of(double p, double q) {
  return Alpha::from_exponents(p, q).value;
}

}  // namespace

ExponentPair::ExponentPair(double p_, double q_)
    : p(p_), q(q_), alpha(alpha_of(p_, q_)) {
  const double lhs = 1.0 - alpha.value - (p - 1.0) / p;
  if (std::fabs(lhs - 1.0 / q) > 1e-15)
    throw std::invalid_argument("ExponentPair: exponent identity failed");
}

LevelSet level_set_volume(const MaximalField& m, double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("level_set_volume: lambda must be positive");
  Coord vol = 0;
  for (double v : m.base.values)
    if (v > lambda) ++vol;
  return {lambda, vol};
}

FieldSpec FieldSpec::parse(const std::string& text) {
  FieldSpec spec;
  bool have_kind = false;
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("FieldSpec: " + why + " in \"" + text + "\"");
  };
  auto as_int = [&](const std::string& v, Coord lo, Coord hi) {
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(v, &used);
    } catch (const std::exception&) {
      fail("bad integer \"" + v + "\"");
    }
    if (used != v.size()) fail("bad integer \"" + v + "\"");
    if (x < lo || x > hi) fail("out-of-range value \"" + v + "\"");
    return static_cast<Coord>(x);
  };
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(';', pos), text.size());
    const std::string item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) fail("missing '=' in \"" + item + "\"");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "kind") {
      have_kind = true;
      if (val == "spikes")
        spec.kind = FieldKind::spikes;
      else if (val == "rect-union-indicator")
        spec.kind = FieldKind::rect_union_indicator;
      else if (val == "uniform-noise")
        spec.kind = FieldKind::uniform_noise;
      else if (val == "smooth-bump")
        spec.kind = FieldKind::smooth_bump;
      else
        fail("unknown kind \"" + val + "\"");
    } else if (key == "n") {
      spec.n = static_cast<int>(as_int(val, 1, 8));
    } else if (key == "size") {
      spec.size = as_int(val, 1, 1 << 20);
    } else if (key == "k") {
      spec.k = static_cast<int>(as_int(val, 0, 1 << 20));
    } else if (key == "seed") {
      std::size_t used = 0;
      unsigned long long x = 0;
      try {
        x = std::stoull(val, &used);
      } catch (const std::exception&) {
        fail("bad seed \"" + val + "\"");
      }
      if (used != val.size()) fail("bad seed \"" + val + "\"");
      spec.seed = x;
    } else {
      fail("unknown key \"" + key + "\"");
    }
  }
  if (!have_kind) fail("missing kind");
  return spec;
}

std::string FieldSpec::to_string() const {
  std::string kind_name;
  switch (kind) {
    case FieldKind::spikes: kind_name = "spikes"; break;
    case FieldKind::rect_union_indicator: kind_name = "rect-union-indicator"; break;
    case FieldKind::uniform_noise: kind_name = "uniform-noise"; break;
    case FieldKind::smooth_bump: kind_name = "smooth-bump"; break;
  }
  return "kind=" + kind_name + ";n=" + std::to_string(n) +
         ";size=" + std::to_string(size) + ";k=" + std::to_string(k) +
         ";seed=" + std::to_string(seed);
}

ScalarField generate_field(const FieldSpec& spec) {
  if (spec.n < 1 || spec.size < 1 || spec.k < 0)
    throw std::invalid_argument("generate_field: malformed spec");
  const int d = 2 * spec.n + 1;
  ScalarField f{Rect(Coords(d, 0), Coords(d, spec.size))};
  SplitMix64 rng(spec.seed);
  const std::uint64_t m = static_cast<std::uint64_t>(spec.size);

  switch (spec.kind) {
    case FieldKind::spikes: {
      Coords p(d);
      for (int s = 0; s < spec.k; ++s) {
        for (int i = 0; i < d; ++i) p[i] = static_cast<Coord>(rng.below(m));
        f.ref(p) += 1.0;
      }
      break;
    }
    case FieldKind::rect_union_indicator: {
      Coords lo(d), hi(d), p(d);
      for (int r = 0; r < spec.k; ++r) {
        for (int i = 0; i < d; ++i) {
          lo[i] = static_cast<Coord>(rng.below(m));
          hi[i] = lo[i] + 1 +
                  static_cast<Coord>(rng.below(m - static_cast<std::uint64_t>(lo[i])));
        }
        p = lo;
        for (;;) {
          f.ref(p) = 1.0;
          int i = d - 1;
          for (; i >= 0; --i) {
            if (++p[i] < hi[i]) break;
            p[i] = lo[i];
          }
          if (i < 0) break;
        }
      }
      break;
    }
    case FieldKind::uniform_noise: {
      for (double& v : f.values) v = rng.unit();
      break;
    }
    case FieldKind::smooth_bump: {
      // Separable triangular bump, positive on the whole window.
      const double c = static_cast<double>(spec.size - 1) / 2.0;
      const double r = static_cast<double>(spec.size + 1) / 2.0;
      Coords p(d, 0);
      for (;;) {
        double v = 1.0;
        for (int i = 0; i < d; ++i)
          v *= 1.0 - std::fabs(static_cast<double>(p[i]) - c) / r;
        f.ref(p) = v;
        int i = d - 1;
        for (; i >= 0; --i) {
          if (++p[i] < spec.size) break;
          p[i] = 0;
        }
        if (i < 0) break;
      }
      break;
    }
  }
  return f;
}

Rect ratio_window(const ScalarField& f, int factor) {
  const auto hull = f.support_hull();
  if (!hull)
    throw std::invalid_argument("ratio_window: field is identically zero");
  return dilated(*hull, factor);
}

std::vector<double> default_lambda_grid(const ScalarField& m,
                                        std::size_t cap) {
  if (cap < 2) throw std::invalid_argument("default_lambda_grid: cap < 2");
  std::vector<double> v;
  v.reserve(m.values.size());
  for (double x : m.values)
    if (x > 0.0) v.push_back(x);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  std::vector<double> grid;
  if (v.empty()) return grid;
  if (v.size() <= cap) {
    grid = v;
  } else {
    grid.reserve(cap);
    for (std::size_t i = 0; i < cap; ++i)
      grid.push_back(v[(i * (v.size() - 1)) / (cap - 1)]);
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }
  for (double& x : grid) x = std::nextafter(x, 0.0);
  return grid;
}

WeakTypeResult weak_type_ratio(const ScalarField& f, const ExponentPair& exps,
                               const GroupParams& params,
                               std::span<const double> lambda_grid,
                               int window_factor) {
  for (double lam : lambda_grid)
    if (!(lam > 0.0))
      throw std::invalid_argument("weak_type_ratio: lambda must be positive");
  const Rect window = ratio_window(f, window_factor);
  const EvalMode mode =
      window.volume() <= kExactCellCap ? EvalMode::exact : EvalMode::dyadic;
  const MaximalField m =
      heisenberg_maximal(f, exps.alpha, params, window, mode);

  std::vector<double> own;
  std::span<const double> grid = lambda_grid;
  if (grid.empty()) {
    own = default_lambda_grid(m.base);
    grid = own;
  }
  std::vector<double> vals = m.base.values;
  std::sort(vals.begin(), vals.end());
  const double fnorm = lp_norm(f, exps.p);

  double best = 0.0;
  double lstar = grid.empty() ? 0.0 : grid.front();
  for (double lam : grid) {
    const auto it = std::upper_bound(vals.begin(), vals.end(), lam);
    const auto nvol = static_cast<double>(vals.end() - it);
    if (nvol == 0.0) continue;
    const double r = lam * std::pow(nvol, 1.0 / exps.q) / fnorm;
    if (r > best) {
      best = r;
      lstar = lam;
    }
  }
  const double corr = mode == EvalMode::dyadic
                          ? dyadic_gap_factor(window.dims(), exps.alpha)
                          : 1.0;
  return {best * corr, lstar, mode, window};
}

StrongNormResult strong_norm_ratio(const ScalarField& f,
                                   const ExponentPair& exps,
                                   const GroupParams& params,
                                   int window_factor) {
  const Rect window = ratio_window(f, window_factor);
  const EvalMode mode =
      window.volume() <= kExactCellCap ? EvalMode::exact : EvalMode::dyadic;
  const MaximalField m =
      heisenberg_maximal(f, exps.alpha, params, window, mode);
  const double ratio = lp_norm(m.base, exps.q) / lp_norm(f, exps.p);
  return {ratio, mode, window};
}

}  // namespace hmax
