#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "hmax/analysis.hpp"
#include "oracles.hpp"

using namespace hmax;
using namespace hmax::testing;

TEST_CASE("exponent pairs") {
  CHECK(ExponentPair(2.0, 2.0).alpha.value == 0.0);
  CHECK(ExponentPair(1.5, 3.0).alpha.value == doctest::Approx(1.0 / 3.0));
  CHECK(ExponentPair(2.0, 4.0).alpha.value == doctest::Approx(0.25));

  CHECK_THROWS_AS(ExponentPair(1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(ExponentPair(0.5, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(ExponentPair(2.0, 1.5), std::invalid_argument);

  // Construction enforces 1 - alpha - (p-1)/p = 1/q to 1e-15; a grid
  // of pairs must all pass it.
  for (double p = 1.01; p < 4.0; p += 0.37)
    for (double q = p; q < 6.0; q += 0.53) CHECK_NOTHROW(ExponentPair(p, q));
}

TEST_CASE("field spec parsing") {
  const FieldSpec s = FieldSpec::parse("kind=spikes;n=2;size=6;k=9;seed=77");
  CHECK(s.kind == FieldKind::spikes);
  CHECK(s.n == 2);
  CHECK(s.size == 6);
  CHECK(s.k == 9);
  CHECK(s.seed == 77);
  CHECK(FieldSpec::parse(s.to_string()).to_string() == s.to_string());

  // Every key but kind is defaulted.
  const FieldSpec d = FieldSpec::parse("kind=uniform-noise");
  CHECK(d.kind == FieldKind::uniform_noise);
  CHECK(d.n == 1);
  CHECK(d.size == 8);

  CHECK_THROWS_AS(FieldSpec::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(FieldSpec::parse("n=1;size=8"), std::invalid_argument);
  CHECK_THROWS_AS(FieldSpec::parse("kind=bogus"), std::invalid_argument);
  CHECK_THROWS_AS(FieldSpec::parse("kind=spikes;m=3"), std::invalid_argument);
  CHECK_THROWS_AS(FieldSpec::parse("kind=spikes;size=x"), std::invalid_argument);
  CHECK_THROWS_AS(FieldSpec::parse("kind=spikes;n=0"), std::invalid_argument);
}

TEST_CASE("field generation is deterministic") {
  for (const char* text :
       {"kind=spikes;n=1;size=8;k=16;seed=3",
        "kind=rect-union-indicator;n=1;size=8;k=5;seed=3",
        "kind=uniform-noise;n=1;size=6;seed=3",
        "kind=smooth-bump;n=1;size=7;seed=3"}) {
    const FieldSpec spec = FieldSpec::parse(text);
    const ScalarField a = generate_field(spec);
    const ScalarField b = generate_field(spec);
    CHECK(a.window == b.window);
    CHECK(a.values == b.values);
  }

  FieldSpec s1 = FieldSpec::parse("kind=uniform-noise;n=1;size=6;seed=1");
  FieldSpec s2 = s1;
  s2.seed = 2;
  CHECK(generate_field(s1).values != generate_field(s2).values);
}

TEST_CASE("field generation shapes") {
  const ScalarField sp =
      generate_field(FieldSpec::parse("kind=spikes;n=1;size=8;k=20;seed=5"));
  CHECK(sp.window == Rect({0, 0, 0}, {8, 8, 8}));
  CHECK(naive_rect_sum(sp, sp.window, false) == 20.0);  // unit masses stack
  for (const double v : sp.values) CHECK(v == std::floor(v));

  const ScalarField ru = generate_field(
      FieldSpec::parse("kind=rect-union-indicator;n=1;size=8;k=6;seed=5"));
  for (const double v : ru.values) CHECK((v == 0.0 || v == 1.0));
  CHECK(naive_rect_sum(ru, ru.window, false) > 0.0);

  const ScalarField un =
      generate_field(FieldSpec::parse("kind=uniform-noise;n=1;size=6;seed=5"));
  for (const double v : un.values) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }

  const ScalarField sb =
      generate_field(FieldSpec::parse("kind=smooth-bump;n=1;size=7;seed=5"));
  const double c = 3.0, r = 4.0;  // center (size-1)/2, radius (size+1)/2
  int mismatches = 0;
  for_each_cell(sb.window, [&](std::span<const Coord> p) {
    double want = 1.0;
    for (const Coord x : p) want *= 1.0 - std::fabs(x - c) / r;
    if (sb.at(p) != want) ++mismatches;
  });
  CHECK(mismatches == 0);
  CHECK(sb.at(pt({3, 3, 3})) == 1.0);
}

TEST_CASE("level set volumes") {
  const ScalarField f =
      generate_field(FieldSpec::parse("kind=uniform-noise;n=1;size=5;seed=9"));
  const MaximalField m =
      heisenberg_maximal(f, Alpha(0.0), GroupParams(1, 0), f.window,
                         EvalMode::exact);

  CHECK(level_set_volume(m, 1e9).volume == 0);
  CHECK_THROWS_AS(level_set_volume(m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(level_set_volume(m, -1.0), std::invalid_argument);

  // Sweeping the attained values gives the complementary cumulative
  // histogram, and the volumes are nonincreasing.
  std::vector<double> vals(m.base.values);
  std::sort(vals.begin(), vals.end());
  Coord prev = m.base.window.volume() + 1;
  for (const double v : vals) {
    if (v <= 0.0) continue;
    Coord above = 0;
    for (const double w : m.base.values)
      if (w > v) ++above;
    const LevelSet ls = level_set_volume(m, v);
    CHECK(ls.volume == above);
    CHECK(ls.volume <= prev);
    prev = ls.volume;
  }
}

TEST_CASE("level sets: indicator field") {
  // M_0 of an indicator is 1 on the rectangle, so just below 1 the
  // level set holds at least the rectangle.
  const Rect r({0, 0, 0}, {4, 2, 2});
  ScalarField f(r, 1.0);
  const MaximalField m = heisenberg_maximal(
      f, Alpha(0.0), GroupParams(1, 0), dilated(r, 3), EvalMode::exact);
  CHECK(level_set_volume(m, 0.99).volume >= 16);
  CHECK(level_set_volume(m, 1.0).volume == 0);  // strict comparison
}

TEST_CASE("default lambda grid sits one ulp under the attained values") {
  ScalarField m(Rect({0, 0, 0}, {2, 2, 2}));
  m.values = {0.0, 0.5, 0.5, 1.25, 2.0, 2.0, 3.5, 0.0};
  const std::vector<double> grid = default_lambda_grid(m);
  REQUIRE(grid.size() == 4);  // distinct positives only
  const std::vector<double> distinct{0.5, 1.25, 2.0, 3.5};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(grid[i] == std::nextafter(distinct[i], 0.0));
    CHECK(grid[i] < distinct[i]);
  }

  // Subsampling keeps at most cap entries and always the largest.
  SplitMix64 rng(0x7a01);
  ScalarField big(Rect({0, 0, 0}, {8, 8, 8}));
  for (double& v : big.values) v = rng.unit();
  const double top = *std::max_element(big.values.begin(), big.values.end());
  const std::vector<double> sub = default_lambda_grid(big, 16);
  CHECK(sub.size() <= 16);
  CHECK(sub.back() == std::nextafter(top, 0.0));
  CHECK(std::is_sorted(sub.begin(), sub.end()));
}

TEST_CASE("weak type ratio: indicator floor and exact mode") {
  const Rect r({0, 0, 0}, {4, 2, 2});
  const ScalarField f(r, 1.0);
  const ExponentPair pq(2.0, 2.0);
  const WeakTypeResult w = weak_type_ratio(f, pq, GroupParams(1, 0));
  // Just below 1, the level set already contains R: the ratio reaches
  // lambda * vol(R)^(1/2) / vol(R)^(1/2) -> 1.
  CHECK(w.ratio >= 1.0 - 1e-12);
  CHECK(w.mode == EvalMode::exact);  // 12x6x6 window is under the cap
  CHECK(w.window == dilated(r, 3));
  CHECK(w.lambda_star > 0.0);
}

TEST_CASE("weak type ratio: scale invariance") {
  const ScalarField f =
      generate_field(FieldSpec::parse("kind=spikes;n=1;size=6;k=10;seed=4"));
  const ExponentPair pq(2.0, 4.0);
  const GroupParams gp(1, 1);
  const double base = weak_type_ratio(f, pq, gp).ratio;
  for (const double c : {7.5, 0.125, -2.0}) {
    ScalarField g = f;
    for (double& v : g.values) v *= c;
    CHECK(weak_type_ratio(g, pq, gp).ratio ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("weak type ratio: rejects bad input") {
  const ScalarField zero(Rect({0, 0, 0}, {3, 3, 3}));
  const ExponentPair pq(2.0, 2.0);
  CHECK_THROWS_AS(weak_type_ratio(zero, pq, GroupParams(1, 0)),
                  std::invalid_argument);

  const ScalarField f =
      generate_field(FieldSpec::parse("kind=spikes;n=1;size=4;k=3;seed=1"));
  const std::vector<double> bad{0.5, 0.0};
  CHECK_THROWS_AS(weak_type_ratio(f, pq, GroupParams(1, 0), bad),
                  std::invalid_argument);
}

TEST_CASE("weak type ratio: corrected dyadic dominates exact") {
  // The certified upper bound: on any window, the dyadic sup times
  // 4^{d(1-a)} is at least the exact sup, grid point by grid point.
  const ScalarField f =
      generate_field(FieldSpec::parse("kind=spikes;n=1;size=5;k=6;seed=11"));
  const ExponentPair pq(2.0, 4.0);
  const GroupParams gp(1, 1);

  const WeakTypeResult exact = weak_type_ratio(f, pq, gp);
  REQUIRE(exact.mode == EvalMode::exact);

  const MaximalField mdy = heisenberg_maximal(f, pq.alpha, gp, exact.window,
                                              EvalMode::dyadic);
  const double corr = dyadic_gap_factor(3, pq.alpha);
  const double fnorm = lp_norm(f, pq.p);
  double dy = 0.0;
  // Unsubsampled grid: the dyadic sup over all left limits, so the
  // domination argument applies to every lambda of the exact grid.
  for (const double lam : default_lambda_grid(mdy.base, std::size_t(1) << 20)) {
    const double nvol =
        static_cast<double>(level_set_volume(mdy, lam).volume);
    dy = std::max(dy, lam * std::pow(nvol, 1.0 / pq.q) / fnorm);
  }
  CHECK(dy * corr >= exact.ratio * (1.0 - 1e-12));
}

TEST_CASE("weak type ratio: chebyshev floor on spike fields") {
  // With p = q and the window containing supp f, every lambda in the
  // grid satisfies vol{M > lambda} >= vol{f > lambda}, so the measured
  // sup dominates the same functional computed from f alone.
  const ScalarField f =
      generate_field(FieldSpec::parse("kind=spikes;n=1;size=6;k=12;seed=8"));
  const ExponentPair pq(2.0, 2.0);
  const GroupParams gp(1, 0);
  const WeakTypeResult w = weak_type_ratio(f, pq, gp);

  const MaximalField m = heisenberg_maximal(f, pq.alpha, gp, w.window, w.mode);
  const double fnorm = lp_norm(f, pq.p);
  double floor_ratio = 0.0;
  for (const double lam : default_lambda_grid(m.base)) {
    Coord nvol = 0;
    for (const double v : f.values)
      if (v > lam) ++nvol;
    floor_ratio = std::max(
        floor_ratio,
        lam * std::pow(static_cast<double>(nvol), 1.0 / pq.q) / fnorm);
  }
  CHECK(w.ratio >= floor_ratio * (1.0 - 1e-12));
}

TEST_CASE("strong norm ratio") {
  const Rect r({0, 0, 0}, {4, 2, 2});
  const ScalarField f(r, 1.0);
  const ExponentPair pq(2.0, 2.0);
  const StrongNormResult s = strong_norm_ratio(f, pq, GroupParams(1, 0));
  // M_0 f >= f pointwise and the window strictly contains supp f.
  CHECK(s.ratio > 1.0);
  CHECK(s.window == dilated(r, 3));

  const ScalarField noise =
      generate_field(FieldSpec::parse("kind=uniform-noise;n=1;size=5;seed=2"));
  const ExponentPair pq2(1.5, 3.0);
  const double base = strong_norm_ratio(noise, pq2, GroupParams(1, 2)).ratio;
  ScalarField scaled = noise;
  for (double& v : scaled.values) v *= -6.0;
  CHECK(strong_norm_ratio(scaled, pq2, GroupParams(1, 2)).ratio ==
        doctest::Approx(base).epsilon(1e-12));

  const ScalarField zero(Rect({0, 0, 0}, {3, 3, 3}));
  CHECK_THROWS_AS(strong_norm_ratio(zero, pq, GroupParams(1, 0)),
                  std::invalid_argument);
}

TEST_CASE("ratio window") {
  ScalarField f(Rect({0, 0, 0}, {9, 9, 9}));
  f.ref(pt({4, 4, 4})) = 2.0;
  CHECK(ratio_window(f, 3) == Rect({3, 3, 3}, {6, 6, 6}));
  f.ref(pt({5, 4, 4})) = 1.0;
  CHECK(ratio_window(f, 5) == Rect({0, 2, 2}, {10, 7, 7}));

  const ScalarField zero(Rect({0, 0, 0}, {3, 3, 3}));
  CHECK_THROWS_AS(ratio_window(zero, 3), std::invalid_argument);
}
