// hmax: strong maximal operator and rectangle covering toolkit.
//
// Subcommands: maximal (compute and store a maximal field), cover
// (greedy half-overlap selection with verifiers and ratio estimates),
// weaktype / strongnorm (seeded ratio ensembles), selftest (fixed-seed
// invariant sweep). Reports are deterministic byte for byte for a
// given config; wall-clock timings appear only under --timing.
//
// Exit codes: 0 ok, 1 invariant violation, 2 malformed input,
// 3 resource limit.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmax/analysis.hpp"
#include "hmax/covering.hpp"
#include "hmax/io.hpp"
#include "hmax/maximal.hpp"
#include "hmax/selftest.hpp"

using nlohmann::json;
using namespace hmax;

namespace {

std::string window_str(const Rect& r) {
  std::string s;
  for (int i = 0; i < r.dims(); ++i) {
    if (i) s += "x";
    s += "[" + std::to_string(r.lo[i]) + "," + std::to_string(r.hi[i]) + ")";
  }
  return s;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const std::size_t dots = text.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t a = std::stoull(text.substr(0, dots));
    const std::uint64_t b = std::stoull(text.substr(dots + 2));
    if (b < a) throw std::invalid_argument("seeds: empty range " + text);
    for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) seeds.push_back(std::stoull(item));
  if (seeds.empty()) throw std::invalid_argument("seeds: none given");
  return seeds;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) items.push_back(item);
  return items;
}

void emit(const std::string& out, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream os(out);
    if (!os) throw std::invalid_argument("cannot open " + out);
    os << text;
  }
}

Rect parse_rect_arg(const std::string& text, int d) {
  std::istringstream ss(text);
  Coords vals;
  Coord x;
  while (ss >> x) vals.push_back(x);
  if (static_cast<int>(vals.size()) != 2 * d)
    throw std::invalid_argument("query: need " + std::to_string(2 * d) +
                                " integers, got \"" + text + "\"");
  return Rect(Coords(vals.begin(), vals.begin() + d),
              Coords(vals.begin() + d, vals.end()));
}

struct MaximalArgs {
  std::string field, spec, query, out;
  double alpha = 0.0;
  Coord mu = 0;
  std::string mode = "exact";
  int window_factor = 3;
  Coord exact_cap = 4096;
};

int run_maximal(const MaximalArgs& a) {
  if (a.field.empty() == a.spec.empty()) {
    std::cerr << "maximal: give exactly one of --field and --spec\n";
    return 2;
  }
  const ScalarField f = a.field.empty()
                            ? generate_field(FieldSpec::parse(a.spec))
                            : read_field_file(a.field);
  const int d = f.window.dims();
  const GroupParams gp((d - 1) / 2, a.mu);
  const EvalMode mode = parse_eval_mode(a.mode);
  const Rect query = a.query.empty() ? ratio_window(f, a.window_factor)
                                     : parse_rect_arg(a.query, d);
  if (mode == EvalMode::exact && query.volume() > a.exact_cap) {
    std::cerr << "maximal: exact mode over " << query.volume()
              << " cells exceeds cap " << a.exact_cap
              << " (raise --exact-cap or use --mode dyadic)\n";
    return 3;
  }
  const MaximalField m = heisenberg_maximal(f, Alpha(a.alpha), gp, query, mode);
  if (a.out.empty() || a.out == "-")
    write_maximal_field(std::cout, m);
  else
    write_maximal_field_file(a.out, m);
  return 0;
}

struct CoverArgs {
  std::string rects, p = "1.5,2,3", order = "file", out;
};

int run_cover(const CoverArgs& a) {
  std::vector<Rect> rects = read_rects_file(a.rects);
  if (rects.empty()) throw std::invalid_argument("cover: no rectangles in " + a.rects);

  if (a.order == "voldesc") {
    std::stable_sort(rects.begin(), rects.end(),
                     [](const Rect& x, const Rect& y) {
                       return x.volume() > y.volume();
                     });
  } else if (a.order.rfind("shuffle:", 0) == 0) {
    SplitMix64 rng(std::stoull(a.order.substr(8)));
    for (std::size_t i = rects.size(); i > 1; --i)
      std::swap(rects[i - 1], rects[rng.below(i)]);
  } else if (a.order != "file") {
    throw std::invalid_argument("cover: unknown order " + a.order);
  }

  const auto p_items = split_list(a.p);
  std::vector<double> ps;
  for (const std::string& s : p_items) ps.push_back(std::stod(s));

  const Selection sel = cf_select(rects);
  const CoveringReport ver = verify_selection(rects, sel);
  const CoveringReport est = est_ratios(rects, sel, ps);

  json doc;
  doc["command"] = "cover";
  doc["rects"] = a.rects;
  doc["order"] = a.order;
  doc["n_input"] = rects.size();
  doc["n_selected"] = sel.selected.size();
  doc["selected"] = sel.selected;
  doc["est1_ratio"] = est.est1_ratio;
  for (std::size_t i = 0; i < ps.size(); ++i)
    doc["est2_ratio_p" + p_items[i]] = est.est2_ratios.at(ps[i]);
  doc["half_bound_ok"] = ver.half_bound_ok;
  doc["disjoint_core_ok"] = ver.disjoint_core_ok;
  doc["core_tie_count"] = ver.core_tie_count;
  emit(a.out, doc);
  return ver.half_bound_ok && ver.disjoint_core_ok ? 0 : 1;
}

struct EnsembleArgs {
  std::string spec, seeds = "1..5", out;
  double p = 2.0, q = 2.0;
  Coord mu = 0;
  int window_factor = 3;
  bool timing = false;
};

int run_ensemble(const EnsembleArgs& a, bool weak) {
  FieldSpec fs = FieldSpec::parse(a.spec);
  const ExponentPair exps(a.p, a.q);
  const GroupParams gp(fs.n, a.mu);
  const std::vector<std::uint64_t> seeds = parse_seeds(a.seeds);

  json instances = json::array();
  std::vector<double> ratios;
  for (const std::uint64_t seed : seeds) {
    fs.seed = seed;
    const ScalarField f = generate_field(fs);
    const auto t0 = std::chrono::steady_clock::now();
    json row;
    double ratio = 0.0, wide = 0.0;
    if (weak) {
      const WeakTypeResult r = weak_type_ratio(f, exps, gp, {}, a.window_factor);
      const WeakTypeResult r5 =
          weak_type_ratio(f, exps, gp, {}, a.window_factor + 2);
      ratio = r.ratio;
      wide = r5.ratio;
      row["lambda_star"] = r.lambda_star;
      row["mode"] = to_string(r.mode);
      row["window"] = window_str(r.window);
      row["window_wide"] = window_str(r5.window);
    } else {
      const StrongNormResult r = strong_norm_ratio(f, exps, gp, a.window_factor);
      const StrongNormResult r5 =
          strong_norm_ratio(f, exps, gp, a.window_factor + 2);
      ratio = r.ratio;
      wide = r5.ratio;
      row["mode"] = to_string(r.mode);
      row["window"] = window_str(r.window);
      row["window_wide"] = window_str(r5.window);
    }
    row["seed"] = seed;
    row["spec"] = fs.to_string();
    row["n"] = fs.n;
    row["mu"] = gp.mu;
    row["p"] = exps.p;
    row["q"] = exps.q;
    row["alpha"] = exps.alpha.value;
    row["ratio"] = ratio;
    row["ratio_wide"] = wide;
    row["window_sensitive"] = std::fabs(wide - ratio) > 0.05 * ratio;
    if (a.timing) {
      const auto t1 = std::chrono::steady_clock::now();
      row["runtime_ms"] =
          std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    instances.push_back(row);
    ratios.push_back(ratio);
  }

  std::sort(ratios.begin(), ratios.end());
  const std::size_t m = ratios.size();
  json doc;
  doc["command"] = weak ? "weaktype" : "strongnorm";
  doc["spec"] = a.spec;
  doc["seeds"] = a.seeds;
  doc["p"] = exps.p;
  doc["q"] = exps.q;
  doc["alpha"] = exps.alpha.value;
  doc["mu"] = gp.mu;
  doc["n"] = fs.n;
  doc["window_factor"] = a.window_factor;
  doc["instances"] = instances;
  doc["summary"] = {
      {"min", ratios.front()},
      {"median", m % 2 ? ratios[m / 2] : (ratios[m / 2 - 1] + ratios[m / 2]) / 2},
      {"max", ratios.back()}};
  emit(a.out, doc);
  return 0;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const std::overflow_error& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strong maximal operator and rectangle covering toolkit"};
  app.require_subcommand(0, 1);
  app.set_config("--config", "", "read flag defaults from a config file");

  MaximalArgs ma;
  CLI::App* maximal = app.add_subcommand(
      "maximal", "compute a maximal field and write it out");
  maximal->configurable();
  maximal->add_option("--field", ma.field, "input field file");
  maximal->add_option("--spec", ma.spec, "generate the input field from a spec");
  maximal->add_option("--alpha", ma.alpha, "fractional exponent in [0,1)");
  maximal->add_option("--mu", ma.mu, "group twist parameter");
  maximal->add_option("--mode", ma.mode, "exact or dyadic");
  maximal->add_option("--query", ma.query,
                      "evaluation window as 2d integers (lo then hi)");
  maximal->add_option("--window-factor", ma.window_factor,
                      "odd dilation of the support hull when --query is absent");
  maximal->add_option("--exact-cap", ma.exact_cap,
                      "cell budget for exact mode");
  maximal->add_option("--out", ma.out, "output field file ('-' = stdout)");

  CoverArgs ca;
  CLI::App* cover = app.add_subcommand(
      "cover", "greedy half-overlap selection with verification");
  cover->configurable();
  cover->add_option("--rects", ca.rects, "rectangle list file")->required();
  cover->add_option("--p", ca.p, "comma list of overlap-norm exponents");
  cover->add_option("--order", ca.order, "file, voldesc, or shuffle:SEED");
  cover->add_option("--out", ca.out, "report file ('-' = stdout)");

  EnsembleArgs wa;
  CLI::App* weaktype = app.add_subcommand(
      "weaktype", "weak-type ratio ensemble over seeded fields");
  weaktype->configurable();
  weaktype->add_option("--spec", wa.spec, "field spec (seed overridden)")
      ->required();
  weaktype->add_option("--seeds", wa.seeds, "A..B or comma list");
  weaktype->add_option("--p", wa.p, "exponent p");
  weaktype->add_option("--q", wa.q, "exponent q");
  weaktype->add_option("--mu", wa.mu, "group twist parameter");
  weaktype->add_option("--window-factor", wa.window_factor,
                       "odd dilation of the support hull");
  weaktype->add_flag("--timing", wa.timing, "include runtime_ms per instance");
  weaktype->add_option("--out", wa.out, "report file ('-' = stdout)");

  EnsembleArgs sa;
  CLI::App* strongnorm = app.add_subcommand(
      "strongnorm", "strong-norm ratio ensemble over seeded fields");
  strongnorm->configurable();
  strongnorm->add_option("--spec", sa.spec, "field spec (seed overridden)")
      ->required();
  strongnorm->add_option("--seeds", sa.seeds, "A..B or comma list");
  strongnorm->add_option("--p", sa.p, "exponent p");
  strongnorm->add_option("--q", sa.q, "exponent q");
  strongnorm->add_option("--mu", sa.mu, "group twist parameter");
  strongnorm->add_option("--window-factor", sa.window_factor,
                         "odd dilation of the support hull");
  strongnorm->add_flag("--timing", sa.timing, "include runtime_ms per instance");
  strongnorm->add_option("--out", sa.out, "report file ('-' = stdout)");

  CLI::App* selftest = app.add_subcommand(
      "selftest", "fixed-seed invariant sweep over every module");
  selftest->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*maximal) return guarded([&] { return run_maximal(ma); });
  if (*cover) return guarded([&] { return run_cover(ca); });
  if (*weaktype) return guarded([&] { return run_ensemble(wa, true); });
  if (*strongnorm) return guarded([&] { return run_ensemble(sa, false); });
  if (*selftest)
    return guarded([&] {
      const SelftestResult r = run_selftest();
      std::cout << r.summary;
      return r.failures == 0 ? 0 : 1;
    });

  std::cout << app.help();
  return 2;
}
