#include "hmax/maximal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace hmax {

Alpha::Alpha(double v) : value(v) {
  if (!(v >= 0.0 && v < 1.0))
    throw std::invalid_argument("Alpha: need 0 <= value < 1");
}

Alpha Alpha::from_exponents(double p, double q) {
  if (!std::isfinite(p) || !std::isfinite(q) || !(p > 1.0) || !(q >= p))
    throw std::invalid_argument("Alpha: need 1 < p <= q < inf");
  return Alpha(1.0 / p - 1.0 / q);
}

std::string to_string(EvalMode m) {
  return m == EvalMode::exact ? "exact" : "dyadic";
}

EvalMode parse_eval_mode(const std::string& s) {
  if (s == "exact") return EvalMode::exact;
  if (s == "dyadic") return EvalMode::dyadic;
  throw std::invalid_argument("mode must be 'exact' or 'dyadic', got '" + s +
                              "'");
}

double dyadic_gap_factor(int d, Alpha alpha) {
  return std::exp2(2.0 * d * (1.0 - alpha.value));
}

namespace {

int ceil_log2(Coord ext) {  // smallest k with 2^k >= ext, ext >= 1
  int k = 0;
  while ((Coord(1) << k) < ext) ++k;
  return k;
}

Coord floor_div(Coord a, Coord b) {  // b > 0
  Coord q = a / b;
  return (a % b < 0) ? q - 1 : q;
}

// All hull volumes in one evaluation are bounded by the volume of
// hull(support, query), so a lookup table usually covers everything;
// beyond the cap we fall back to pow.
constexpr Coord kPowTableCap = Coord(1) << 22;

struct PowTable {
  double exponent;          // alpha - 1
  std::vector<double> tab;  // tab[v] = v^exponent
  double operator()(Coord vol) const {
    if (vol < static_cast<Coord>(tab.size()))
      return tab[static_cast<std::size_t>(vol)];
    return std::pow(static_cast<double>(vol), exponent);
  }
};

PowTable make_pow_table(Coord vol_max, double alpha) {
  PowTable p;
  p.exponent = alpha - 1.0;
  const Coord n = std::min(vol_max, kPowTableCap);
  p.tab.resize(static_cast<std::size_t>(n) + 1);
  p.tab[0] = 0.0;  // boxes are nonempty, never read
  for (Coord v = 1; v <= n; ++v)
    p.tab[static_cast<std::size_t>(v)] =
        std::pow(static_cast<double>(v), p.exponent);
  return p;
}

std::vector<PowTable> make_pow_tables(Coord vol_max,
                                      std::span<const Alpha> alphas) {
  std::vector<PowTable> p;
  p.reserve(alphas.size());
  for (const Alpha& a : alphas) p.push_back(make_pow_table(vol_max, a.value));
  return p;
}

// ---------------------------------------------------------------------
// Exact evaluation.
//
// Candidate reduction: the sup over all boxes R containing x equals
//
//   max over boxes B inside the support hull H of
//       vol(hull(B, cell(x)))^(a-1) * mass(B),
//
// because mass(R) = mass(R cap H), R contains hull(R cap H, cell(x)),
// and vol^(a-1) is nonincreasing for a < 1, so replacing R by that
// hull never lowers the value. The B faces then reduce to a finite
// set per axis:
//   - leading axes, column coordinate w inside [H.lo, H.hi): widening
//     B to cover w keeps B in H, cannot lose mass, and leaves the hull
//     unchanged, so only faces with a <= w < b are needed;
//   - leading axes, w right of the range: the hull extent is w+1-a no
//     matter where b is and mass grows with b, so b = H.hi; mirrored
//     on the left;
//   - last axis: a face can shrink over zero-mass cells, keeping the
//     mass while possibly shrinking the hull, so faces sit on the
//     support steps of B's own cylinder (plus the cell of x, which the
//     hull supplies by itself).
// ---------------------------------------------------------------------

struct LeadCand {
  Coord a, b;   // box face pair on this axis, [a, b) inside H
  Coord hlen;   // extent of hull([a,b), w) on this axis
};

void build_lead_cands(Coord lo, Coord hi, Coord w, std::vector<LeadCand>& out) {
  out.clear();
  if (w < lo) {
    for (Coord b = lo + 1; b <= hi; ++b) out.push_back({lo, b, b - w});
  } else if (w >= hi) {
    for (Coord a = lo; a < hi; ++a) out.push_back({a, hi, w + 1 - a});
  } else {
    for (Coord a = lo; a <= w; ++a)
      for (Coord b = w + 1; b <= hi; ++b) out.push_back({a, b, b - a});
  }
}

struct ExactScratch {
  std::vector<std::vector<LeadCand>> cands;
  std::vector<std::size_t> idx;
  std::vector<std::size_t> corner_off;
  std::vector<int> corner_sign;
  std::vector<double> D;
  std::vector<Coord> steps;
};

// Evaluates M_a f at (w, t) for every t in [qlo, qhi), writing the
// maxima into out[alpha][t - qlo] (callers zero-initialize). pre must
// be built over |f| and H must be f's support hull.
void exact_eval_column(const PrefixSumTable& pre, const Rect& H,
                       std::span<const PowTable> pows,
                       std::span<const Coord> w, Coord qlo, Coord qhi,
                       double* const* out, ExactScratch& scr) {
  const int d = H.dims();
  const int nl = d - 1;
  const int na = static_cast<int>(pows.size());
  const Coord tbase = H.lo[d - 1];
  const Coord extT = H.extent(d - 1);

  scr.cands.resize(nl);
  for (int j = 0; j < nl; ++j)
    build_lead_cands(H.lo[j], H.hi[j], w[j], scr.cands[j]);

  const std::size_t nD = static_cast<std::size_t>(extT) + 1;
  scr.D.resize(nD);
  const std::size_t t0 =
      static_cast<std::size_t>(tbase - pre.window().lo[d - 1]);
  const double* cum = pre.data();

  const unsigned ncorner = 1u << nl;
  scr.corner_off.resize(ncorner);
  scr.corner_sign.resize(ncorner);

  scr.idx.assign(nl, 0);
  for (;;) {
    Coord vlead = 1;
    for (int j = 0; j < nl; ++j) vlead *= scr.cands[j][scr.idx[j]].hlen;

    for (unsigned mask = 0; mask < ncorner; ++mask) {
      std::size_t off = 0;
      int bits = 0;
      for (int j = 0; j < nl; ++j) {
        const LeadCand& c = scr.cands[j][scr.idx[j]];
        Coord coord = c.b;
        if (mask & (1u << j)) {
          coord = c.a;
          ++bits;
        }
        off += static_cast<std::size_t>(coord - pre.window().lo[j]) *
               pre.stride(j);
      }
      scr.corner_off[mask] = off + t0;
      scr.corner_sign[mask] = (bits & 1) ? -1 : 1;
    }

    // D[i] = mass of the leading box times [tbase, tbase + i)
    double* D = scr.D.data();
    std::fill(D, D + nD, 0.0);
    for (unsigned mask = 0; mask < ncorner; ++mask) {
      const double* row = cum + scr.corner_off[mask];
      if (scr.corner_sign[mask] > 0)
        for (std::size_t i = 0; i < nD; ++i) D[i] += row[i];
      else
        for (std::size_t i = 0; i < nD; ++i) D[i] -= row[i];
    }

    scr.steps.clear();
    for (Coord i = 0; i < extT; ++i)
      if (D[i + 1] > D[i]) scr.steps.push_back(i);

    const int r = static_cast<int>(scr.steps.size());
    if (r > 0) {
      const Coord* st = scr.steps.data();

      // spanning boxes [s_i, s_j + 1), constant value over the cells
      // they contain
      int j0 = static_cast<int>(
          std::lower_bound(st, st + r, qlo - tbase) - st);
      for (int i = 0; i < r; ++i) {
        const Coord si = tbase + st[i];
        if (si >= qhi) break;
        const double Di = D[st[i]];
        for (int j = std::max(i, j0); j < r; ++j) {
          const Coord e = tbase + st[j] + 1;
          const double m = D[st[j] + 1] - Di;
          const Coord clo = si > qlo ? si : qlo;
          const Coord chi = e < qhi ? e : qhi;
          const Coord vol = vlead * (e - si);
          for (int a = 0; a < na; ++a) {
            const double val = pows[a](vol) * m;
            double* o = out[a];
            for (Coord t = clo; t < chi; ++t)
              if (val > o[t - qlo]) o[t - qlo] = val;
          }
        }
      }

      // boxes strictly left / right of t (gaps and cells outside H);
      // per side only the mass-maximal box for each outer face matters
      int nlt = 0;  // steps with cell < t
      int igt = 0;  // first step index with cell > t
      for (Coord t = qlo; t < qhi; ++t) {
        while (nlt < r && tbase + st[nlt] < t) ++nlt;
        while (igt < r && tbase + st[igt] <= t) ++igt;
        if (nlt > 0) {
          const double Dend = D[st[nlt - 1] + 1];
          for (int i = 0; i < nlt; ++i) {
            const double m = Dend - D[st[i]];
            const Coord vol = vlead * (t + 1 - (tbase + st[i]));
            for (int a = 0; a < na; ++a) {
              const double val = pows[a](vol) * m;
              if (val > out[a][t - qlo]) out[a][t - qlo] = val;
            }
          }
        }
        if (igt < r) {
          const double Dfirst = D[st[igt]];
          for (int j = igt; j < r; ++j) {
            const double m = D[st[j] + 1] - Dfirst;
            const Coord vol = vlead * (tbase + st[j] + 1 - t);
            for (int a = 0; a < na; ++a) {
              const double val = pows[a](vol) * m;
              if (val > out[a][t - qlo]) out[a][t - qlo] = val;
            }
          }
        }
      }
    }

    int j = nl - 1;
    for (; j >= 0; --j) {
      if (++scr.idx[j] < scr.cands[j].size()) break;
      scr.idx[j] = 0;
    }
    if (j < 0) break;
  }
}

// Flattened iteration over the leading cells of a query window.
struct ColumnSpace {
  int nl;
  Coords qlo;
  std::vector<Coord> ext;
  std::vector<std::size_t> stride;  // output strides incl. the t axis
  std::int64_t ncols = 1;

  explicit ColumnSpace(const Rect& query) {
    const int d = query.dims();
    nl = d - 1;
    qlo.assign(query.lo.begin(), query.lo.end());
    ext.resize(nl);
    stride.assign(nl, 1);
    for (int j = 0; j < nl; ++j) ext[j] = query.extent(j);
    std::size_t s = static_cast<std::size_t>(query.extent(d - 1));
    for (int j = nl - 1; j >= 0; --j) {
      stride[j] = s;
      s *= static_cast<std::size_t>(ext[j]);
    }
    for (int j = 0; j < nl; ++j) ncols *= ext[j];
  }

  void unflatten(std::int64_t ci, std::vector<Coord>& w,
                 std::size_t& base) const {
    w.resize(nl);
    base = 0;
    for (int j = nl - 1; j >= 0; --j) {
      const Coord rel = ci % ext[j];
      ci /= ext[j];
      w[j] = qlo[j] + rel;
      base += static_cast<std::size_t>(rel) * stride[j];
    }
  }
};

// ---------------------------------------------------------------------
// Shifted dyadic family.
//
// Per axis, scales 2^k for k = 0..K with K = ceil(log2 of the arena
// extent), three grids per scale with offsets 0, floor(2^k/3),
// floor(2*2^k/3), all anchored at the arena's lower corner A. Within
// one scale the combined grid boundaries are at least floor(2^k/3)
// apart, so an interval of length L <= 2*floor(2^k/3) cannot straddle
// a boundary of all three grids: some grid contains it in one cell.
// Taking the smallest such k gives a containing interval of length at
// most 4L for L >= 4 (directly checked for L <= 3), and when that k
// exceeds K the anchored top interval [A, A + 2^K) contains the whole
// axis with 2^K < 3L/2 + 3 <= 4L. Hence every box in the arena sits
// inside a family box, side at most 4x per axis, which is the
// fast <= exact <= 4^{d(1-a)} * fast sandwich.
// ---------------------------------------------------------------------

int axis_offsets(int k, Coord out[3]) {
  const Coord s = Coord(1) << k;
  out[0] = 0;
  if (k == 0) return 1;
  if (k == 1) {
    out[1] = 1;
    return 2;
  }
  out[1] = s / 3;
  out[2] = 2 * s / 3;
  return 3;
}

struct DyBox {
  Coord lo;
  int k;  // interval [lo, lo + 2^k)
};

// One interval per (scale, offset) contains x.
void containing_intervals(Coord A, int K, Coord x, std::vector<DyBox>& out) {
  out.clear();
  Coord offs[3];
  for (int k = 0; k <= K; ++k) {
    const Coord s = Coord(1) << k;
    const int m = axis_offsets(k, offs);
    for (int oi = 0; oi < m; ++oi) {
      const Coord rel = x - A - offs[oi];
      out.push_back({A + offs[oi] + floor_div(rel, s) * s, k});
    }
  }
}

// Last-axis family enumerated once per column: every interval that
// meets the query's t range, flat-indexed for O(1) lookups.
struct TFamily {
  Coord A = 0;
  int K = 0;
  struct Grid {
    int k;
    Coord off, mlo, mhi;
    int base;
  };
  std::vector<Grid> grids;
  std::vector<int> kof;  // scale per flat id
  int total = 0;

  void build(Coord A_, int K_, Coord qlo, Coord qhi) {
    A = A_;
    K = K_;
    grids.clear();
    kof.clear();
    total = 0;
    Coord offs[3];
    for (int k = 0; k <= K; ++k) {
      const Coord s = Coord(1) << k;
      const int m = axis_offsets(k, offs);
      for (int oi = 0; oi < m; ++oi) {
        Grid g;
        g.k = k;
        g.off = offs[oi];
        g.mlo = floor_div(qlo - A - g.off, s);
        g.mhi = floor_div(qhi - 1 - A - g.off, s);
        g.base = total;
        total += static_cast<int>(g.mhi - g.mlo + 1);
        kof.resize(static_cast<std::size_t>(total), k);
        grids.push_back(g);
      }
    }
  }

  Coord lo_of(const Grid& g, Coord m) const {
    return A + g.off + m * (Coord(1) << g.k);
  }
  int flat_containing(const Grid& g, Coord t) const {
    return g.base +
           static_cast<int>(floor_div(t - A - g.off, Coord(1) << g.k) - g.mlo);
  }
  int flat_of(const Grid& g, Coord tau) const {  // -1 when off the query range
    const Coord m = floor_div(tau - A - g.off, Coord(1) << g.k);
    if (m < g.mlo || m > g.mhi) return -1;
    return g.base + static_cast<int>(m - g.mlo);
  }
};

void build_w2(double alpha, int max_e, std::vector<double>& w2) {
  w2.resize(static_cast<std::size_t>(max_e) + 1);
  for (int e = 0; e <= max_e; ++e)
    w2[static_cast<std::size_t>(e)] = std::exp2((alpha - 1.0) * e);
}

struct SpikeList {
  int d = 0;
  std::size_t nnz = 0;
  std::vector<Coord> pos;   // nnz x d, row-major
  std::vector<double> val;  // |f| at the cell, > 0
};

SpikeList collect_spikes(const ScalarField& f) {
  SpikeList sp;
  sp.d = f.window.dims();
  Coords p(f.window.lo);
  for (std::size_t idx = 0; idx < f.values.size(); ++idx) {
    if (f.values[idx] != 0.0) {
      sp.pos.insert(sp.pos.end(), p.begin(), p.end());
      sp.val.push_back(std::abs(f.values[idx]));
    }
    for (int i = sp.d - 1; i >= 0; --i) {
      if (++p[i] < f.window.hi[i]) break;
      p[i] = f.window.lo[i];
    }
  }
  sp.nnz = sp.val.size();
  return sp;
}

struct FastScratch {
  std::vector<std::vector<DyBox>> lead;
  std::vector<std::size_t> li;
  std::vector<std::vector<double>> w2;
  std::vector<double> V;
  std::vector<Coord> blo, bhi;
  std::vector<std::uint64_t> sets, cur;
  std::vector<double> acc;
  std::vector<int> touched;
};

// Shared tail: fold the per-interval bests into the output cells.
void fold_fast_output(const TFamily& tf, const std::vector<double>& V, int na,
                      Coord qlo, Coord qhi, double* const* out) {
  for (Coord t = qlo; t < qhi; ++t) {
    for (const TFamily::Grid& g : tf.grids) {
      const int flat = tf.flat_containing(g, t);
      for (int a = 0; a < na; ++a) {
        const double v = V[static_cast<std::size_t>(a) * tf.total + flat];
        if (v > out[a][t - qlo]) out[a][t - qlo] = v;
      }
    }
  }
}

void prepare_fast_column(std::span<const Coord> leadA, std::span<const int> leadK,
                         std::span<const Coord> w, const TFamily& tf,
                         std::span<const Alpha> alphas, FastScratch& scr) {
  const int nl = static_cast<int>(w.size());
  scr.lead.resize(nl);
  int max_e = tf.K;
  for (int j = 0; j < nl; ++j) {
    containing_intervals(leadA[j], leadK[j], w[j], scr.lead[j]);
    max_e += leadK[j];
  }
  scr.w2.resize(alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a)
    build_w2(alphas[a].value, max_e, scr.w2[a]);
  scr.V.assign(alphas.size() * static_cast<std::size_t>(tf.total), 0.0);
}

// Dense path: one prefix-table box sum per (leading combo, t interval).
void dense_fast_column(const PrefixSumTable& pre, std::span<const Coord> leadA,
                       std::span<const int> leadK, std::span<const Coord> w,
                       const TFamily& tf, std::span<const Alpha> alphas,
                       Coord qlo, Coord qhi, double* const* out,
                       FastScratch& scr) {
  const int nl = static_cast<int>(w.size());
  const int na = static_cast<int>(alphas.size());
  prepare_fast_column(leadA, leadK, w, tf, alphas, scr);
  scr.blo.resize(nl + 1);
  scr.bhi.resize(nl + 1);

  scr.li.assign(nl, 0);
  for (;;) {
    int E = 0;
    for (int j = 0; j < nl; ++j) {
      const DyBox& b = scr.lead[j][scr.li[j]];
      scr.blo[j] = b.lo;
      scr.bhi[j] = b.lo + (Coord(1) << b.k);
      E += b.k;
    }
    for (const TFamily::Grid& g : tf.grids) {
      const Coord s = Coord(1) << g.k;
      Coord lo = tf.lo_of(g, g.mlo);
      for (Coord m = g.mlo; m <= g.mhi; ++m, lo += s) {
        scr.blo[nl] = lo;
        scr.bhi[nl] = lo + s;
        const double mass = pre.rect_sum(scr.blo, scr.bhi);
        if (mass <= 0.0) continue;
        const int flat = g.base + static_cast<int>(m - g.mlo);
        for (int a = 0; a < na; ++a) {
          const double v = scr.w2[a][E + g.k] * mass;
          double& slot = scr.V[static_cast<std::size_t>(a) * tf.total + flat];
          if (v > slot) slot = v;
        }
      }
    }
    int j = nl - 1;
    for (; j >= 0; --j) {
      if (++scr.li[j] < scr.lead[j].size()) break;
      scr.li[j] = 0;
    }
    if (j < 0) break;
  }
  fold_fast_output(tf, scr.V, na, qlo, qhi, out);
}

// Sparse path: per leading combo, gather the spikes it contains (one
// bitset intersection) and bin their masses by t interval.
void sparse_fast_column(const SpikeList& sp, std::span<const Coord> taus,
                        std::span<const Coord> leadA, std::span<const int> leadK,
                        std::span<const Coord> w, const TFamily& tf,
                        std::span<const Alpha> alphas, Coord qlo, Coord qhi,
                        double* const* out, FastScratch& scr) {
  const int nl = static_cast<int>(w.size());
  const int na = static_cast<int>(alphas.size());
  prepare_fast_column(leadA, leadK, w, tf, alphas, scr);

  const std::size_t words = (sp.nnz + 63) / 64;
  std::size_t nent = 0;
  for (int j = 0; j < nl; ++j) nent += scr.lead[j].size();
  scr.sets.assign(nent * words, 0);
  std::size_t eb = 0;
  for (int j = 0; j < nl; ++j) {
    for (const DyBox& b : scr.lead[j]) {
      const Coord bhi = b.lo + (Coord(1) << b.k);
      std::uint64_t* set = scr.sets.data() + eb * words;
      for (std::size_t s = 0; s < sp.nnz; ++s) {
        const Coord c = sp.pos[s * sp.d + j];
        if (c >= b.lo && c < bhi) set[s >> 6] |= std::uint64_t(1) << (s & 63);
      }
      ++eb;
    }
  }

  scr.cur.resize(words);
  scr.acc.assign(static_cast<std::size_t>(tf.total), 0.0);
  scr.touched.clear();

  scr.li.assign(nl, 0);
  for (;;) {
    int E = 0;
    std::size_t entry = 0, axis_start = 0;
    for (int j = 0; j < nl; ++j) {
      E += scr.lead[j][scr.li[j]].k;
      if (j == 0) entry = scr.li[0];
      axis_start += (j > 0) ? scr.lead[j - 1].size() : 0;
      if (j > 0) {
        const std::uint64_t* s2 =
            scr.sets.data() + (axis_start + scr.li[j]) * words;
        if (j == 1) {
          const std::uint64_t* s1 = scr.sets.data() + entry * words;
          for (std::size_t k = 0; k < words; ++k) scr.cur[k] = s1[k] & s2[k];
        } else {
          for (std::size_t k = 0; k < words; ++k) scr.cur[k] &= s2[k];
        }
      }
    }
    bool any = false;
    for (std::size_t k = 0; k < words; ++k)
      if (scr.cur[k]) {
        any = true;
        break;
      }
    if (any) {
      for (std::size_t k = 0; k < words; ++k) {
        std::uint64_t bits = scr.cur[k];
        while (bits) {
          const int b = std::countr_zero(bits);
          bits &= bits - 1;
          const std::size_t s = k * 64 + static_cast<std::size_t>(b);
          for (const TFamily::Grid& g : tf.grids) {
            const int flat = tf.flat_of(g, taus[s]);
            if (flat < 0) continue;
            if (scr.acc[flat] == 0.0) scr.touched.push_back(flat);
            scr.acc[flat] += sp.val[s];
          }
        }
      }
      for (const int flat : scr.touched) {
        const double mass = scr.acc[flat];
        scr.acc[flat] = 0.0;
        for (int a = 0; a < na; ++a) {
          const double v = scr.w2[a][E + tf.kof[flat]] * mass;
          double& slot = scr.V[static_cast<std::size_t>(a) * tf.total + flat];
          if (v > slot) slot = v;
        }
      }
      scr.touched.clear();
    }
    int j = nl - 1;
    for (; j >= 0; --j) {
      if (++scr.li[j] < scr.lead[j].size()) break;
      scr.li[j] = 0;
    }
    if (j < 0) break;
  }
  fold_fast_output(tf, scr.V, na, qlo, qhi, out);
}

void lead_arena(const Rect& H, const Rect& query, std::vector<Coord>& A,
                std::vector<int>& K) {
  const int nl = H.dims() - 1;
  A.resize(nl);
  K.resize(nl);
  for (int j = 0; j < nl; ++j) {
    A[j] = std::min(H.lo[j], query.lo[j]);
    K[j] = ceil_log2(std::max(H.hi[j], query.hi[j]) - A[j]);
  }
}

std::vector<ScalarField> zero_fields(std::span<const Alpha> alphas,
                                     const Rect& query) {
  std::vector<ScalarField> outs;
  outs.reserve(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) outs.emplace_back(query);
  return outs;
}

void check_query(const ScalarField& f, const Rect& query) {
  if (query.dims() != f.window.dims())
    throw std::invalid_argument("query dimension mismatch");
}

}  // namespace

// ---------------------------------------------------------------------
// exact
// ---------------------------------------------------------------------

std::vector<double> maximal_exact_at_multi(const ScalarField& f,
                                           std::span<const Alpha> alphas,
                                           std::span<const Coord> x) {
  const int d = f.window.dims();
  if (static_cast<int>(x.size()) != d)
    throw std::invalid_argument("maximal_exact_at: point dimension mismatch");
  std::vector<double> res(alphas.size(), 0.0);
  const auto H = f.support_hull();
  if (!H || alphas.empty()) return res;
  const PrefixSumTable pre(f, true);
  const auto pows = make_pow_tables(Rect::hull_cell(*H, x).volume(), alphas);
  std::vector<double*> outp(alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) outp[a] = &res[a];
  ExactScratch scr;
  exact_eval_column(pre, *H, pows, x.first(d - 1), x[d - 1], x[d - 1] + 1,
                    outp.data(), scr);
  return res;
}

double maximal_exact_at(const ScalarField& f, Alpha alpha,
                        std::span<const Coord> x) {
  return maximal_exact_at_multi(f, std::span<const Alpha>(&alpha, 1), x)[0];
}

std::vector<ScalarField> maximal_exact_multi(const ScalarField& f,
                                             std::span<const Alpha> alphas,
                                             const Rect& query) {
  check_query(f, query);
  std::vector<ScalarField> outs = zero_fields(alphas, query);
  const auto H = f.support_hull();
  if (!H || alphas.empty()) return outs;
  const PrefixSumTable pre(f, true);
  const auto pows = make_pow_tables(Rect::hull(*H, query).volume(), alphas);
  const ColumnSpace cs(query);
  const int d = query.dims();
  const Coord qlo = query.lo[d - 1], qhi = query.hi[d - 1];

#pragma omp parallel
  {
    ExactScratch scr;
    std::vector<Coord> w;
    std::vector<double*> outp(alphas.size());
#pragma omp for schedule(dynamic)
    for (std::int64_t ci = 0; ci < cs.ncols; ++ci) {
      std::size_t base;
      cs.unflatten(ci, w, base);
      for (std::size_t a = 0; a < alphas.size(); ++a)
        outp[a] = outs[a].values.data() + base;
      exact_eval_column(pre, *H, pows, w, qlo, qhi, outp.data(), scr);
    }
  }
  return outs;
}

ScalarField maximal_exact_field(const ScalarField& f, Alpha alpha,
                                const Rect& query) {
  return std::move(
      maximal_exact_multi(f, std::span<const Alpha>(&alpha, 1), query)[0]);
}

// ---------------------------------------------------------------------
// shifted-dyadic
// ---------------------------------------------------------------------

double maximal_fast_at(const ScalarField& f, Alpha alpha,
                       std::span<const Coord> x, const Rect& query) {
  const int d = f.window.dims();
  if (static_cast<int>(x.size()) != d || query.dims() != d)
    throw std::invalid_argument("maximal_fast_at: dimension mismatch");
  const auto H = f.support_hull();
  if (!H) return 0.0;
  const PrefixSumTable pre(f, true);
  const Rect arena = Rect::hull(*H, Rect::hull_cell(query, x));

  // family intervals containing x, per axis
  std::vector<std::vector<DyBox>> per_axis(d);
  int max_e = 0;
  for (int i = 0; i < d; ++i) {
    const int K = ceil_log2(arena.extent(i));
    containing_intervals(arena.lo[i], K, x[i], per_axis[i]);
    max_e += K;
  }
  std::vector<double> w2;
  build_w2(alpha.value, max_e, w2);

  double best = 0.0;
  std::vector<std::size_t> idx(d, 0);
  Coords blo(d), bhi(d);
  for (;;) {
    int E = 0;
    for (int i = 0; i < d; ++i) {
      const DyBox& b = per_axis[i][idx[i]];
      blo[i] = b.lo;
      bhi[i] = b.lo + (Coord(1) << b.k);
      E += b.k;
    }
    const double mass = pre.rect_sum(blo, bhi);
    if (mass > 0.0) best = std::max(best, w2[E] * mass);
    int i = d - 1;
    for (; i >= 0; --i) {
      if (++idx[i] < per_axis[i].size()) break;
      idx[i] = 0;
    }
    if (i < 0) break;
  }
  return best;
}

std::vector<ScalarField> maximal_fast_multi(const ScalarField& f,
                                            std::span<const Alpha> alphas,
                                            const Rect& query) {
  check_query(f, query);
  std::vector<ScalarField> outs = zero_fields(alphas, query);
  const auto H = f.support_hull();
  if (!H || alphas.empty()) return outs;

  const int d = query.dims();
  const Coord qlo = query.lo[d - 1], qhi = query.hi[d - 1];
  std::vector<Coord> leadA;
  std::vector<int> leadK;
  lead_arena(*H, query, leadA, leadK);
  const Coord At = std::min(H->lo[d - 1], qlo);
  const int Kt = ceil_log2(std::max(H->hi[d - 1], qhi) - At);
  TFamily tf;
  tf.build(At, Kt, qlo, qhi);

  const SpikeList sp = collect_spikes(f);
  const bool sparse = sp.nnz <= kSparseMaxNnz;
  std::vector<Coord> taus;
  std::optional<PrefixSumTable> pre;
  if (sparse) {
    taus.resize(sp.nnz);
    for (std::size_t s = 0; s < sp.nnz; ++s)
      taus[s] = sp.pos[s * sp.d + d - 1];
  } else {
    pre.emplace(f, true);
  }

  const ColumnSpace cs(query);
#pragma omp parallel
  {
    FastScratch scr;
    std::vector<Coord> w;
    std::vector<double*> outp(alphas.size());
#pragma omp for schedule(dynamic)
    for (std::int64_t ci = 0; ci < cs.ncols; ++ci) {
      std::size_t base;
      cs.unflatten(ci, w, base);
      for (std::size_t a = 0; a < alphas.size(); ++a)
        outp[a] = outs[a].values.data() + base;
      if (sparse)
        sparse_fast_column(sp, taus, leadA, leadK, w, tf, alphas, qlo, qhi,
                           outp.data(), scr);
      else
        dense_fast_column(*pre, leadA, leadK, w, tf, alphas, qlo, qhi,
                          outp.data(), scr);
    }
  }
  return outs;
}

MaximalField maximal_fast(const ScalarField& f, Alpha alpha,
                          const Rect& query) {
  ScalarField base = std::move(
      maximal_fast_multi(f, std::span<const Alpha>(&alpha, 1), query)[0]);
  const int n = (query.dims() - 1) / 2;
  return MaximalField{std::move(base), alpha.value, EvalMode::dyadic,
                      GroupParams(n, 0)};
}

// ---------------------------------------------------------------------
// twisted
// ---------------------------------------------------------------------

std::vector<ScalarField> heisenberg_maximal_multi(
    const ScalarField& f, std::span<const Alpha> alphas,
    const GroupParams& params, const Rect& query, EvalMode mode) {
  const int d = params.d();
  if (f.window.dims() != d || query.dims() != d)
    throw std::invalid_argument("heisenberg_maximal: dimension mismatch");
  std::vector<ScalarField> outs = zero_fields(alphas, query);
  const auto H = f.support_hull();
  if (!H || alphas.empty()) return outs;

  const int n = params.n;
  const Coord qlo = query.lo[d - 1], qhi = query.hi[d - 1];
  // shears move only the last axis, so the leading arena is shared
  std::vector<Coord> leadA;
  std::vector<int> leadK;
  lead_arena(*H, query, leadA, leadK);

  SpikeList sp;
  bool sparse = false;
  if (mode == EvalMode::dyadic) {
    sp = collect_spikes(f);
    sparse = sp.nnz <= kSparseMaxNnz;
  }

  const ColumnSpace cs(query);
#pragma omp parallel
  {
    ExactScratch escr;
    FastScratch fscr;
    TFamily tf;
    std::vector<Coord> w, taus(sparse ? sp.nnz : 0);
    std::vector<double*> outp(alphas.size());
#pragma omp for schedule(dynamic)
    for (std::int64_t ci = 0; ci < cs.ncols; ++ci) {
      std::size_t base;
      cs.unflatten(ci, w, base);
      for (std::size_t a = 0; a < alphas.size(); ++a)
        outp[a] = outs[a].values.data() + base;
      const std::span<const Coord> bu(w.data(), static_cast<std::size_t>(n));
      const std::span<const Coord> bv(w.data() + n,
                                      static_cast<std::size_t>(n));

      if (mode == EvalMode::exact) {
        const ScalarField g = shear_field(f, bu, bv, params);
        const Rect Hg = *g.support_hull();
        const PrefixSumTable pre(g, true);
        Coords clo(w.begin(), w.end()), chi(w.begin(), w.end());
        for (int j = 0; j < d - 1; ++j) ++chi[j];
        clo.push_back(qlo);
        chi.push_back(qhi);
        const Rect colrect(std::move(clo), std::move(chi));
        const auto pows =
            make_pow_tables(Rect::hull(Hg, colrect).volume(), alphas);
        exact_eval_column(pre, Hg, pows, w, qlo, qhi, outp.data(), escr);
      } else if (sparse) {
        Coord tmin = 0, tmax = 0;
        for (std::size_t s = 0; s < sp.nnz; ++s) {
          const std::span<const Coord> xi(sp.pos.data() + s * sp.d,
                                          static_cast<std::size_t>(n));
          const std::span<const Coord> eta(sp.pos.data() + s * sp.d + n,
                                           static_cast<std::size_t>(n));
          const Coord shift = twist_shift(bu, bv, xi, eta, params);
          // g(.,tau) = f(.,tau + shift): the spike lands at tau - shift
          taus[s] = checked_add(sp.pos[s * sp.d + d - 1], -shift);
          if (s == 0) {
            tmin = tmax = taus[s];
          } else {
            tmin = std::min(tmin, taus[s]);
            tmax = std::max(tmax, taus[s]);
          }
        }
        const Coord At = std::min(tmin, qlo);
        const int Kt = ceil_log2(std::max(tmax + 1, qhi) - At);
        tf.build(At, Kt, qlo, qhi);
        sparse_fast_column(sp, taus, leadA, leadK, w, tf, alphas, qlo, qhi,
                           outp.data(), fscr);
      } else {
        const ScalarField g = shear_field(f, bu, bv, params);
        const Rect Hg = *g.support_hull();
        const PrefixSumTable pre(g, true);
        const Coord At = std::min(Hg.lo[d - 1], qlo);
        const int Kt = ceil_log2(std::max(Hg.hi[d - 1], qhi) - At);
        tf.build(At, Kt, qlo, qhi);
        dense_fast_column(pre, leadA, leadK, w, tf, alphas, qlo, qhi,
                          outp.data(), fscr);
      }
    }
  }
  return outs;
}

MaximalField heisenberg_maximal(const ScalarField& f, Alpha alpha,
                                const GroupParams& params, const Rect& query,
                                EvalMode mode) {
  ScalarField base =
      std::move(heisenberg_maximal_multi(f, std::span<const Alpha>(&alpha, 1),
                                         params, query, mode)[0]);
  return MaximalField{std::move(base), alpha.value, mode, params};
}

// ---------------------------------------------------------------------
// group form
// ---------------------------------------------------------------------

std::vector<double> maximal_group_form_at_multi(const ScalarField& f,
                                                std::span<const Alpha> alphas,
                                                const GroupParams& params,
                                                const LatticePoint& x) {
  const int d = params.d();
  const int n = params.n;
  if (f.window.dims() != d || static_cast<int>(x.c.size()) != d)
    throw std::invalid_argument("maximal_group_form_at: dimension mismatch");

  // Window of y with x * y^{-1} possibly inside f's window. Leading
  // coordinates invert exactly; the tau range is hulled over the
  // corner values of the twist (linear in each leading coordinate).
  Coords ylo(d), yhi(d);
  for (int j = 0; j < d - 1; ++j) {
    ylo[j] = checked_add(checked_add(x.c[j], -f.window.hi[j]), 1);
    yhi[j] = checked_add(checked_add(x.c[j], -f.window.lo[j]), 1);
  }
  Coord smin = 0, smax = 0;
  {
    const unsigned combos = 1u << (d - 1);
    Coords xi(n), eta(n);
    for (unsigned mask = 0; mask < combos; ++mask) {
      for (int i = 0; i < n; ++i)
        xi[i] = (mask & (1u << i)) ? ylo[i] : yhi[i] - 1;
      for (int i = 0; i < n; ++i)
        eta[i] = (mask & (1u << (n + i))) ? ylo[n + i] : yhi[n + i] - 1;
      // z_t = t - tau - twist(x_u, x_v, xi, eta)
      const Coord s = twist_shift(std::span<const Coord>(x.c.data(), n),
                                  std::span<const Coord>(x.c.data() + n, n),
                                  xi, eta, params);
      if (mask == 0) {
        smin = smax = s;
      } else {
        smin = std::min(smin, s);
        smax = std::max(smax, s);
      }
    }
  }
  // t - tau - s in [w.lo_t, w.hi_t)  =>  tau in [t - s - w.hi_t + 1, ...)
  ylo[d - 1] = checked_add(checked_add(x.t(), -smax), -f.window.hi[d - 1] + 1);
  yhi[d - 1] = checked_add(checked_add(x.t(), -smin), -f.window.lo[d - 1] + 1);

  ScalarField h{Rect(std::move(ylo), std::move(yhi))};
  Coords y(h.window.lo);
  for (std::size_t idx = 0; idx < h.values.size(); ++idx) {
    const LatticePoint z =
        group_mul(x, group_inv(LatticePoint(Coords(y))), params);
    h.values[idx] = std::abs(f.at(z.c));
    for (int i = d - 1; i >= 0; --i) {
      if (++y[i] < h.window.hi[i]) break;
      y[i] = h.window.lo[i];
    }
  }
  const Coords origin(d, 0);
  return maximal_exact_at_multi(h, alphas, origin);
}

double maximal_group_form_at(const ScalarField& f, Alpha alpha,
                             const GroupParams& params, const LatticePoint& x) {
  return maximal_group_form_at_multi(f, std::span<const Alpha>(&alpha, 1),
                                     params, x)[0];
}

}  // namespace hmax
