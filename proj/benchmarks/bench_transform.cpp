// Microbenchmarks for the hot numerical kernels: forward transform, dual
// transform, exact discrete adjoint, one R-application, and the annihilator
// residual. Grid/scan sizes scale with the benchmark range argument.
#include <benchmark/benchmark.h>

#include <funkrad/fields.hpp>
#include <funkrad/geometry.hpp>
#include <funkrad/kaczmarz.hpp>
#include <funkrad/range.hpp>
#include <funkrad/transform.hpp>

using namespace funkrad;

namespace {
GridDensity bench_phantom(int n) {
  PhantomSpec spec;
  spec.primitives.push_back(
      {PhantomPrimitive::Kind::kDisk, {-0.2, 0.15}, 0.3, 1.0});
  spec.primitives.push_back(
      {PhantomPrimitive::Kind::kGaussian, {0.25, -0.2}, 0.12, 0.8});
  return make_phantom(spec, n, n);
}

ScanGeometry bench_geom(int n) {
  return ScanGeometry::full_scan(1.5, n, n);
}
}  // namespace

static void BM_Forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto geom = bench_geom(n);
  auto f = bench_phantom(n);
  for (auto _ : state) {
    auto u = forward(f, geom);
    benchmark::DoNotOptimize(u.values.data());
  }
  state.SetItemsProcessed(state.iterations() * geom.n_detectors *
                          geom.n_radii);
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Arg(128);

static void BM_Dual(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto geom = bench_geom(n);
  auto u = random_smooth_weight(geom, 7);
  for (auto _ : state) {
    auto f = dual(u, geom, n, n);
    benchmark::DoNotOptimize(f.values.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Dual)->Arg(32)->Arg(64)->Arg(128);

static void BM_DiscreteAdjoint(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto geom = bench_geom(n);
  auto u = random_smooth_weight(geom, 7);
  for (auto _ : state) {
    auto f = discrete_adjoint_apply(u, geom, n, n);
    benchmark::DoNotOptimize(f.values.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_DiscreteAdjoint)->Arg(32)->Arg(64)->Arg(128);

static void BM_ApplyR(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto geom = bench_geom(n);
  auto u = forward(bench_phantom(n), geom);
  for (auto _ : state) {
    auto r = apply_R(u, 0.1, geom, n, n);
    benchmark::DoNotOptimize(r.values.data());
  }
}
BENCHMARK(BM_ApplyR)->Arg(32)->Arg(64);

static void BM_RangeResidual(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto geom = bench_geom(n);
  auto g = forward(bench_phantom(n), geom);
  auto a = build_annihilator(2, 4, {0.5, -1.0, 0.75});
  for (auto _ : state) {
    benchmark::DoNotOptimize(range_residual(g, a));
  }
}
BENCHMARK(BM_RangeResidual)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
