#include "hmax/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "hmax/analysis.hpp"
#include "hmax/covering.hpp"
#include "hmax/heisenberg.hpp"
#include "hmax/io.hpp"
#include "hmax/lattice.hpp"
#include "hmax/maximal.hpp"

namespace hmax {

namespace {

struct Suite {
  std::string name;
  int passed = 0;
  int total = 0;

  explicit Suite(std::string n) : name(std::move(n)) {}
  void check(bool ok) {
    ++total;
    if (ok) ++passed;
  }
};

bool close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

LatticePoint random_point(SplitMix64& rng, int n) {
  Coords c(2 * n + 1);
  for (Coord& x : c) x = static_cast<Coord>(rng.below(101)) - 50;
  c.back() = static_cast<Coord>(rng.below(2001)) - 1000;
  return LatticePoint(c);
}

Rect random_window(SplitMix64& rng, int d, Coord max_extent, Coord lo_span) {
  Coords lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo[i] = static_cast<Coord>(rng.below(2 * lo_span + 1)) - lo_span;
    hi[i] = lo[i] + 1 + static_cast<Coord>(rng.below(max_extent));
  }
  return Rect(lo, hi);
}

ScalarField random_int_field(SplitMix64& rng, const Rect& w) {
  ScalarField f{w};
  for (double& v : f.values)
    v = static_cast<double>(static_cast<Coord>(rng.below(7)) - 3);
  return f;
}

ScalarField random_float_field(SplitMix64& rng, const Rect& w) {
  ScalarField f{w};
  for (double& v : f.values) v = rng.unit() * 2.0 - 0.5;
  return f;
}

Rect random_rect_in(SplitMix64& rng, const Rect& w) {
  const int d = w.dims();
  Coords lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    const Coord ext = w.extent(i);
    lo[i] = w.lo[i] + static_cast<Coord>(rng.below(static_cast<std::uint64_t>(ext)));
    hi[i] = lo[i] + 1 +
            static_cast<Coord>(rng.below(static_cast<std::uint64_t>(w.hi[i] - lo[i])));
  }
  return Rect(lo, hi);
}

double naive_rect_sum(const ScalarField& f, const Rect& r, bool absolute) {
  const int d = f.window.dims();
  Coords p(d);
  double s = 0.0;
  std::vector<Coord> lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo[i] = std::max(r.lo[i], f.window.lo[i]);
    hi[i] = std::min(r.hi[i], f.window.hi[i]);
    if (lo[i] >= hi[i]) return 0.0;
  }
  p.assign(lo.begin(), lo.end());
  for (;;) {
    const double v = f.at(p);
    s += absolute ? std::fabs(v) : v;
    int i = d - 1;
    for (; i >= 0; --i) {
      if (++p[i] < hi[i]) break;
      p[i] = lo[i];
    }
    if (i < 0) break;
  }
  return s;
}

Coord dense_union_volume(std::span<const Rect> rects) {
  Rect hull = rects[0];
  for (const Rect& r : rects) hull = Rect::hull(hull, r);
  ScalarField mark{hull};
  const int d = hull.dims();
  Coords p(d);
  for (const Rect& r : rects) {
    p = r.lo;
    for (;;) {
      mark.ref(p) = 1.0;
      int i = d - 1;
      for (; i >= 0; --i) {
        if (++p[i] < r.hi[i]) break;
        p[i] = r.lo[i];
      }
      if (i < 0) break;
    }
  }
  Coord count = 0;
  for (double v : mark.values) count += v != 0.0 ? 1 : 0;
  return count;
}

// All boxes inside the support hull, straight from the definition via
// the hull-with-the-query-cell normalization the kernels use.
double maximal_bruteforce_at(const ScalarField& f, double alpha,
                             std::span<const Coord> x) {
  const auto hull = f.support_hull();
  if (!hull) return 0.0;
  const int d = f.window.dims();
  double best = 0.0;
  std::vector<std::pair<Coord, Coord>> iv;
  std::vector<std::size_t> pick(d, 0);
  std::vector<std::vector<std::pair<Coord, Coord>>> axis(d);
  for (int i = 0; i < d; ++i)
    for (Coord a = hull->lo[i]; a < hull->hi[i]; ++a)
      for (Coord b = a + 1; b <= hull->hi[i]; ++b) axis[i].push_back({a, b});
  for (;;) {
    Coords lo(d), hi(d);
    double vol = 1.0;
    for (int i = 0; i < d; ++i) {
      lo[i] = axis[i][pick[i]].first;
      hi[i] = axis[i][pick[i]].second;
      const Coord clo = std::min(lo[i], x[i]);
      const Coord chi = std::max(hi[i], x[i] + 1);
      vol *= static_cast<double>(chi - clo);
    }
    const double mass = naive_rect_sum(f, Rect(lo, hi), true);
    if (mass > 0.0) best = std::max(best, std::pow(vol, alpha - 1.0) * mass);
    int i = d - 1;
    for (; i >= 0; --i) {
      if (++pick[i] < axis[i].size()) break;
      pick[i] = 0;
    }
    if (i < 0) break;
  }
  return best;
}

Suite group_axioms() {
  Suite s("group-axioms");
  for (int n : {1, 2}) {
    for (Coord mu : {Coord(-2), Coord(0), Coord(1), Coord(3)}) {
      const GroupParams gp(n, mu);
      SplitMix64 rng(0x9000 + static_cast<std::uint64_t>(n * 16 + mu + 4));
      const LatticePoint e = LatticePoint::identity(n);
      for (int it = 0; it < 200; ++it) {
        const LatticePoint a = random_point(rng, n);
        const LatticePoint b = random_point(rng, n);
        const LatticePoint c = random_point(rng, n);
        s.check(group_mul(group_mul(a, b, gp), c, gp) ==
                group_mul(a, group_mul(b, c, gp), gp));
        s.check(group_mul(a, e, gp) == a && group_mul(e, a, gp) == a);
        s.check(group_mul(a, group_inv(a), gp) == e &&
                group_mul(group_inv(a), a, gp) == e);
      }
    }
  }
  return s;
}

Suite prefix_oracle() {
  Suite s("prefix-sums");
  SplitMix64 rng(0x11);
  for (int it = 0; it < 30; ++it) {
    const Rect w = random_window(rng, 3, 5, 3);
    const ScalarField f = random_int_field(rng, w);
    const PrefixSumTable plain(f, false), abs(f, true);
    for (int r = 0; r < 10; ++r) {
      const Rect probe = random_window(rng, 3, 8, 5);
      s.check(plain.rect_sum(probe) == naive_rect_sum(f, probe, false));
      s.check(abs.rect_sum(probe) == naive_rect_sum(f, probe, true));
      s.check(plain.rect_sum(probe.lo, probe.hi) == plain.rect_sum(probe));
    }
  }
  for (int it = 0; it < 20; ++it) {
    const Rect w = random_window(rng, 3, 6, 2);
    const ScalarField f = random_float_field(rng, w);
    const PrefixSumTable pre(f, false);
    for (int r = 0; r < 10; ++r) {
      const Rect probe = random_window(rng, 3, 8, 4);
      s.check(close(pre.rect_sum(probe), naive_rect_sum(f, probe, false), 1e-12));
    }
  }
  return s;
}

Suite union_oracle() {
  Suite s("union-volume");
  SplitMix64 rng(0x22);
  for (int it = 0; it < 30; ++it) {
    const Rect w = Rect(Coords(3, 0), Coords(3, 10));
    std::vector<Rect> rects;
    const int m = 1 + static_cast<int>(rng.below(8));
    Coord prev = 0;
    bool monotone = true;
    for (int j = 0; j < m; ++j) {
      rects.push_back(random_rect_in(rng, w));
      const Coord u = union_volume(rects);
      if (u < prev) monotone = false;
      prev = u;
    }
    s.check(union_volume(rects) == dense_union_volume(rects));
    s.check(monotone);
  }
  return s;
}

Suite maximal_kernels() {
  Suite s("maximal-kernels");
  SplitMix64 rng(0x33);
  const Rect w4 = Rect(Coords(3, 0), Coords(3, 4));

  // definition oracle
  for (int it = 0; it < 6; ++it) {
    ScalarField f{w4};
    for (double& v : f.values)
      v = rng.below(3) == 0 ? rng.unit() * 4.0 - 1.0 : 0.0;
    if (!f.support_hull()) f.ref(Coords(3, 1)) = 1.0;
    for (double av : {0.0, 0.5}) {
      for (int qi = 0; qi < 8; ++qi) {
        Coords x(3);
        for (int i = 0; i < 3; ++i)
          x[i] = static_cast<Coord>(rng.below(6)) - 1;
        s.check(close(maximal_exact_at(f, Alpha(av), x),
                      maximal_bruteforce_at(f, av, x), 1e-12));
      }
    }
  }

  // sandwich between the kernels
  for (int it = 0; it < 2; ++it) {
    const Rect w6 = Rect(Coords(3, 0), Coords(3, 6));
    const ScalarField f = random_float_field(rng, w6);
    for (double av : {0.0, 0.5}) {
      const Alpha alpha(av);
      const std::vector<Alpha> alphas{alpha};
      const auto ex = maximal_exact_multi(f, alphas, w6);
      const auto fa = maximal_fast_multi(f, alphas, w6);
      const double gap = dyadic_gap_factor(3, alpha);
      bool ok = true;
      for (std::size_t i = 0; i < ex[0].values.size(); ++i) {
        const double lo = fa[0].values[i], hi = ex[0].values[i];
        if (lo > hi * (1.0 + 1e-12) || hi > gap * lo * (1.0 + 1e-12)) ok = false;
      }
      s.check(ok);
    }
  }

  // group form against the shear pipeline
  for (Coord mu : {Coord(1), Coord(2)}) {
    const GroupParams gp(1, mu);
    for (int it = 0; it < 3; ++it) {
      ScalarField f{w4};
      for (double& v : f.values)
        v = rng.below(2) == 0 ? rng.unit() : 0.0;
      if (!f.support_hull()) f.ref(Coords(3, 1)) = 1.0;
      for (int qi = 0; qi < 4; ++qi) {
        Coords x(3);
        for (int i = 0; i < 3; ++i)
          x[i] = static_cast<Coord>(rng.below(4));
        const Rect cell = Rect::hull_cell(Rect(x, Coords{x[0] + 1, x[1] + 1, x[2] + 1}), x);
        const auto m = heisenberg_maximal(f, Alpha(0.0), gp, cell, EvalMode::exact);
        s.check(close(maximal_group_form_at(f, Alpha(0.0), gp, LatticePoint(x)),
                      m.base.at(x), 1e-12));
      }
    }
  }

  // mu = 0 collapses to the classical kernels, bit for bit
  for (int it = 0; it < 2; ++it) {
    const Rect w5 = Rect(Coords(3, 0), Coords(3, 5));
    const ScalarField f = random_float_field(rng, w5);
    const GroupParams gp(1, 0);
    const std::vector<Alpha> alphas{Alpha(0.25)};
    s.check(heisenberg_maximal_multi(f, alphas, gp, w5, EvalMode::exact)[0]
                .values == maximal_exact_multi(f, alphas, w5)[0].values);
    s.check(heisenberg_maximal_multi(f, alphas, gp, w5, EvalMode::dyadic)[0]
                .values == maximal_fast_multi(f, alphas, w5)[0].values);
  }
  return s;
}

Suite covering_invariants() {
  Suite s("covering");
  SplitMix64 rng(0x44);
  const Rect w = Rect(Coords(3, 0), Coords(3, 10));
  const std::vector<double> ps{1.5, 2.0};
  for (int it = 0; it < 25; ++it) {
    std::vector<Rect> rects;
    const int m = 1 + static_cast<int>(rng.below(12));
    for (int j = 0; j < m; ++j) rects.push_back(random_rect_in(rng, w));

    const Selection sel = cf_select(rects);

    // audit overlaps against dense marking of the prior kept union
    bool audit_ok = sel.selected[0] == 0;
    std::vector<Rect> kept;
    for (std::size_t j = 0; j < rects.size(); ++j) {
      Coord ov = 0;
      if (!kept.empty()) {
        std::vector<Rect> parts;
        for (const Rect& o : kept)
          if (auto is = Rect::intersect(rects[j], o)) parts.push_back(*is);
        if (!parts.empty()) ov = dense_union_volume(parts);
      }
      if (ov != sel.audit[j].overlap) audit_ok = false;
      if (sel.audit[j].decision == Decision::selected) kept.push_back(rects[j]);
    }
    s.check(audit_ok);

    const CoveringReport rep = verify_selection(rects, sel);
    s.check(rep.half_bound_ok && rep.disjoint_core_ok);

    // prefix stability
    if (rects.size() > 1) {
      std::vector<Rect> head(rects.begin(), rects.end() - 1);
      const Selection hsel = cf_select(head);
      bool stable = true;
      for (std::size_t j = 0; j + 1 < rects.size(); ++j)
        if (hsel.audit[j].overlap != sel.audit[j].overlap ||
            hsel.audit[j].decision != sel.audit[j].decision)
          stable = false;
      s.check(stable);
    }

    const CoveringReport er = est_ratios(rects, sel, ps);
    bool ratios_ok = er.est1_ratio >= 1.0 - 1e-12;
    for (const auto& [p, r] : er.est2_ratios)
      if (r < 1.0 - 1e-12) ratios_ok = false;
    s.check(ratios_ok);

    const ScalarField counts = overlap_field(rects, w);
    double total = 0.0;
    for (double v : counts.values) total += v;
    Coord want = 0;
    for (const Rect& r : rects) want = checked_add(want, r.volume());
    s.check(total == static_cast<double>(want));
  }
  return s;
}

Suite analysis_suite() {
  Suite s("analysis");
  for (const char* spec :
       {"kind=spikes;n=1;size=6;k=9;seed=5",
        "kind=rect-union-indicator;n=1;size=6;k=4;seed=5",
        "kind=uniform-noise;n=1;size=5;seed=5",
        "kind=smooth-bump;n=1;size=5;seed=5"}) {
    const FieldSpec fs = FieldSpec::parse(spec);
    const ScalarField a = generate_field(fs);
    const ScalarField b = generate_field(FieldSpec::parse(fs.to_string()));
    s.check(a.window == b.window && a.values == b.values);
  }

  const ScalarField f =
      generate_field(FieldSpec::parse("kind=spikes;n=1;size=6;k=9;seed=5"));
  ScalarField cf = f;
  for (double& v : cf.values) v *= 7.5;
  const ExponentPair pq(2.0, 2.0);
  const GroupParams gp(1, 0);
  s.check(close(weak_type_ratio(f, pq, gp).ratio,
                weak_type_ratio(cf, pq, gp).ratio, 1e-12));
  s.check(close(strong_norm_ratio(f, pq, gp).ratio,
                strong_norm_ratio(cf, pq, gp).ratio, 1e-12));

  for (auto [p, q] : std::vector<std::pair<double, double>>{
           {1.5, 3.0}, {2.0, 2.0}, {2.0, 4.0}, {4.0, 8.0}, {1.01, 1.01}}) {
    const ExponentPair e(p, q);
    s.check(e.alpha.value >= 0.0 && e.alpha.value < 1.0);
  }

  // level sets: nonincreasing in lambda, and exactly the complementary
  // counts at the attained values
  const MaximalField m =
      heisenberg_maximal(f, Alpha(0.0), gp, ratio_window(f, 3), EvalMode::exact);
  std::vector<double> vals = m.base.values;
  std::sort(vals.begin(), vals.end());
  Coord prev = static_cast<Coord>(vals.size()) + 1;
  bool mono = true, histo = true;
  for (std::size_t i = 0; i < vals.size(); i += 37) {
    const LevelSet ls = level_set_volume(m, vals[i]);
    if (ls.volume > prev) mono = false;
    prev = ls.volume;
    const auto above =
        vals.end() - std::upper_bound(vals.begin(), vals.end(), vals[i]);
    if (ls.volume != static_cast<Coord>(above)) histo = false;
  }
  s.check(mono);
  s.check(histo);

  // Chebyshev floor at p = q: M_0 dominates |f|, so the measured ratio
  // dominates the same functional of f itself over the same grid
  const std::vector<double> grid = default_lambda_grid(m.base);
  double fstar = 0.0;
  std::vector<double> fv;
  for (double v : f.values)
    if (v > 0.0) fv.push_back(v);
  std::sort(fv.begin(), fv.end());
  for (double lam : grid) {
    const auto nf =
        static_cast<double>(fv.end() - std::upper_bound(fv.begin(), fv.end(), lam));
    if (nf > 0.0)
      fstar = std::max(fstar, lam * std::pow(nf, 1.0 / pq.q));
  }
  fstar /= lp_norm(f, pq.p);
  s.check(weak_type_ratio(f, pq, gp).ratio >= fstar * (1.0 - 1e-12));
  return s;
}

Suite io_roundtrip() {
  Suite s("io-roundtrip");
  const ScalarField f =
      generate_field(FieldSpec::parse("kind=uniform-noise;n=1;size=4;seed=1"));
  {
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_field(ss, f);
    const ScalarField g = read_field(ss);
    s.check(g.window == f.window && g.values == f.values);
  }
  {
    const MaximalField m{f, 0.5, EvalMode::dyadic, GroupParams(1, 2)};
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_maximal_field(ss, m);
    const MaximalField g = read_maximal_field(ss);
    s.check(g.base.values == f.values && g.alpha == 0.5 &&
            g.mode == EvalMode::dyadic && g.params.mu == 2);
  }
  {
    std::vector<Rect> rects{Rect({0, 0, 0}, {4, 1, 1}), Rect({-2, 0, 1}, {1, 2, 3})};
    std::stringstream ss;
    write_rects(ss, rects);
    const auto back = read_rects(ss);
    s.check(back.size() == 2 && back[0] == rects[0] && back[1] == rects[1]);
  }
  for (const char* bad : {"HMAXFIELD v2 n=1 lo=0 0 0 hi=1 1 1 dtype=f64",
                          "HMAXFIELD v1 n=1 lo=0 0 hi=1 1 1 dtype=f64",
                          "HMAXFIELD v1 n=1 lo=0 0 0 hi=1 1 1 dtype=f32"}) {
    bool threw = false;
    try {
      std::stringstream ss{std::string(bad) + "\n"};
      read_field(ss);
    } catch (const std::invalid_argument&) {
      threw = true;
    }
    s.check(threw);
  }
  return s;
}

}  // namespace

SelftestResult run_selftest() {
  SelftestResult res;
  std::ostringstream out;
  int suites = 0;
  for (const Suite& s :
       {group_axioms(), prefix_oracle(), union_oracle(), maximal_kernels(),
        covering_invariants(), analysis_suite(), io_roundtrip()}) {
    out << s.name << ": " << s.passed << "/" << s.total << "\n";
    res.failures += s.total - s.passed;
    ++suites;
  }
  if (res.failures == 0)
    out << "selftest: PASS (" << suites << " suites)\n";
  else
    out << "selftest: FAIL (" << res.failures << " checks failed)\n";
  res.summary = out.str();
  return res;
}

}  // namespace hmax
