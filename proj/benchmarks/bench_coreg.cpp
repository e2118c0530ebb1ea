#include <benchmark/benchmark.h>

#include "pansharp/coregistration.hpp"
#include "pansharp/synthetic.hpp"

using namespace pansharp;
using ad::i64;

static void BM_estimate_band_shifts(benchmark::State& state) {
  const i64 size = state.range(0);
  SensorSpec spec;
  const auto scene = make_synthetic_scene(
      11, size, 4, spec, {{0.5, -1.0}, {0.0, 0.0}, {1.5, 0.5}, {-1.0, 1.0}});
  for (auto _ : state) {
    auto product = coreg::estimate_band_shifts(scene.pan, scene.ms, spec);
    benchmark::DoNotOptimize(product.a.shifts.data());
  }
  state.SetItemsProcessed(state.iterations() * 169 * 4 * size * size);
}
BENCHMARK(BM_estimate_band_shifts)->Arg(128)->Arg(256)->Arg(512)
    ->Unit(benchmark::kMillisecond);

static void BM_reference_correlation_field(benchmark::State& state) {
  const i64 size = state.range(0);
  SensorSpec spec;
  const auto scene = make_synthetic_scene(12, size, 4, spec, {});
  for (auto _ : state) {
    auto field = coreg::reference_correlation_field(scene.pan, scene.ms, spec);
    benchmark::DoNotOptimize(field.values.data());
  }
}
BENCHMARK(BM_reference_correlation_field)->Arg(256)->Arg(1024)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
