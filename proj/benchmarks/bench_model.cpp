#include <benchmark/benchmark.h>

#include "pansharp/adaptation.hpp"
#include "pansharp/coregistration.hpp"
#include "pansharp/loss.hpp"
#include "pansharp/model.hpp"
#include "pansharp/resample.hpp"
#include "pansharp/synthetic.hpp"
#include "pansharp/tensor.hpp"

using namespace pansharp;
using ad::i64;

static void BM_model_forward(benchmark::State& state) {
  const i64 size = state.range(0);
  SensorSpec spec;
  const auto scene = make_synthetic_scene(21, size, 4, spec, {});
  const auto w = model::init_model(4, 1);
  const Raster mtilde = upsample_poly23(scene.ms, spec.ratio);
  for (auto _ : state) {
    Raster mhat = model::forward(w, scene.pan, mtilde);
    benchmark::DoNotOptimize(mhat.values.data());
  }
}
BENCHMARK(BM_model_forward)->Arg(64)->Arg(128)->Arg(256)
    ->Unit(benchmark::kMillisecond);

// One full whole-image adaptation iteration: forward, total loss,
// backward, optimizer step. This is the cost driver for everything.
static void BM_adapt_iteration(benchmark::State& state) {
  const i64 size = state.range(0);
  SensorSpec spec;
  const auto scene = make_synthetic_scene(
      22, size, 4, spec, {{0.5, -1.0}, {0.0, 0.0}, {1.5, 0.5}, {-1.0, 1.0}});
  const auto product = coreg::estimate_band_shifts(scene.pan, scene.ms, spec);
  const auto w = model::init_model(4, 2);
  adapt::AdaptationConfig cfg;
  cfg.iterations = 1;
  cfg.tile = size;
  for (auto _ : state) {
    auto res = adapt::target_adapt(w, scene.pan, scene.ms, product, cfg);
    benchmark::DoNotOptimize(res.weights.params.data());
  }
}
BENCHMARK(BM_adapt_iteration)->Arg(64)->Arg(128)->Arg(256)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
