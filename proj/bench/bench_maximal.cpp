// Times the column-parallel field kernels against the serial per-point
// reference on identical inputs, and checks bitwise agreement (both
// kernels are deterministic regardless of thread count). Not a ctest;
// run from anywhere when profiling kernel changes.

#include <chrono>
#include <cstdio>
#include <vector>

#include "hmax/analysis.hpp"
#include "hmax/maximal.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace hmax;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Coords coords_at(const Rect& w, std::size_t idx) {
  const int d = static_cast<int>(w.lo.size());
  Coords c(d);
  for (int i = d - 1; i >= 0; --i) {
    const std::size_t ext = static_cast<std::size_t>(w.extent(i));
    c[i] = w.lo[i] + static_cast<Coord>(idx % ext);
    idx /= ext;
  }
  return c;
}

ScalarField noise_field(Coord size, std::uint64_t seed) {
  FieldSpec spec;
  spec.kind = FieldKind::uniform_noise;
  spec.size = size;
  spec.seed = seed;
  return generate_field(spec);
}

struct Row {
  const char* name;
  std::size_t cells;
  double serial_s;
  double parallel_s;
  std::size_t mismatches;
};

template <typename FieldKernel, typename PointKernel>
Row compare(const char* name, const ScalarField& f, Alpha alpha,
            FieldKernel&& field_kernel, PointKernel&& point_kernel) {
  auto t0 = std::chrono::steady_clock::now();
  const ScalarField par = field_kernel(f, alpha);
  const double par_s = seconds_since(t0);

  ScalarField ref(par.window, 0.0);
  t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < ref.values.size(); ++i)
    ref.values[i] = point_kernel(f, alpha, coords_at(ref.window, i));
  const double ser_s = seconds_since(t0);

  std::size_t bad = 0;
  for (std::size_t i = 0; i < ref.values.size(); ++i)
    if (ref.values[i] != par.values[i]) ++bad;

  return Row{name, ref.values.size(), ser_s, par_s, bad};
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp: %d thread(s)\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled\n");
#endif

  const Alpha alpha(0.3);
  std::vector<Row> rows;

  {
    const ScalarField f = noise_field(16, 42);
    const Rect q = f.window;
    rows.push_back(compare(
        "dyadic 16^3", f, alpha,
        [&](const ScalarField& g, Alpha a) {
          const std::vector<Alpha> as{a};
          return maximal_fast_multi(g, as, q)[0];
        },
        [&](const ScalarField& g, Alpha a, const Coords& x) {
          return maximal_fast_at(g, a, x, q);
        }));
  }

  {
    const ScalarField f = noise_field(10, 7);
    const Rect q = f.window;
    rows.push_back(compare(
        "exact 10^3", f, alpha,
        [&](const ScalarField& g, Alpha a) {
          return maximal_exact_field(g, a, q);
        },
        [&](const ScalarField& g, Alpha a, const Coords& x) {
          return maximal_exact_at(g, a, x);
        }));
  }

  std::printf("%-12s %8s %12s %12s %9s %10s\n", "kernel", "cells",
              "serial_ms", "parallel_ms", "speedup", "mismatches");
  std::size_t total_bad = 0;
  for (const Row& r : rows) {
    std::printf("%-12s %8zu %12.1f %12.1f %8.2fx %10zu\n", r.name, r.cells,
                r.serial_s * 1e3, r.parallel_s * 1e3,
                r.parallel_s > 0.0 ? r.serial_s / r.parallel_s : 0.0,
                r.mismatches);
    total_bad += r.mismatches;
  }
  return total_bad == 0 ? 0 : 1;
}
