#include <random>

#include <benchmark/benchmark.h>

#include "pansharp/metrics.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/raster.hpp"

using namespace pansharp;
using ad::i64;

namespace {

Raster random_raster(i64 bands, i64 h, i64 w, std::uint64_t seed) {
  Raster r = Raster::make(bands, h, w);
  std::mt19937_64 rng(seed);
  for (double& v : r.values)
    v = 200.0 + 1600.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  return r;
}

}  // namespace

static void BM_local_correlation_field(benchmark::State& state) {
  const i64 hw = state.range(0);
  const Raster pan = random_raster(1, hw, hw, 1);
  const Raster ms = random_raster(4, hw, hw, 2);
  for (auto _ : state) {
    auto field = metrics::local_correlation_field(pan, ms, 4, 1e-8);
    benchmark::DoNotOptimize(field.values.data());
  }
  state.SetItemsProcessed(state.iterations() * 4 * hw * hw);
}
BENCHMARK(BM_local_correlation_field)->Arg(256)->Arg(512)->Arg(1024);

static void BM_windowed_mean(benchmark::State& state) {
  const i64 hw = state.range(0);
  const ad::Tensor x = random_raster(4, hw, hw, 3).to_tensor();
  for (auto _ : state) {
    ad::Tensor y = ad::windowed_mean(x, 4, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_windowed_mean)->Arg(256)->Arg(1024);

static void BM_d_rho(benchmark::State& state) {
  const i64 hw = state.range(0);
  const Raster pan = random_raster(1, hw, hw, 1);
  const Raster mhat = random_raster(4, hw, hw, 2);
  const auto rho_max = metrics::local_correlation_field(pan, mhat, 4, 1e-8);
  for (auto _ : state) {
    const double v = metrics::d_rho(mhat, pan, rho_max, 4, 1e-8);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_d_rho)->Arg(256)->Arg(512);

static void BM_q2n(benchmark::State& state) {
  const i64 hw = state.range(0);
  const Raster x = random_raster(4, hw, hw, 4);
  const Raster y = random_raster(4, hw, hw, 5);
  metrics::MetricConfig cfg;
  for (auto _ : state) {
    const double v = metrics::q2n(x, y, cfg);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_q2n)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
