#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "pansharp/ops.hpp"
#include "pansharp/tensor.hpp"

using namespace pansharp;
using ad::i64;

namespace {

ad::Tensor random_tensor(ad::Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> data(static_cast<size_t>(s.numel()));
  for (double& v : data) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  return ad::Tensor::from_data(s, std::move(data));
}

}  // namespace

static void BM_conv3x3_forward(benchmark::State& state) {
  const i64 hw = state.range(0), c = state.range(1);
  const ad::Tensor x = random_tensor({1, c, hw, hw}, 1);
  const ad::Tensor w = random_tensor({c, c, 3, 3}, 2);
  for (auto _ : state) {
    ad::Tensor y = ad::conv2d(x, w, ad::Padding::Replicate);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * c * c * 9 * hw * hw);
}
BENCHMARK(BM_conv3x3_forward)->Args({64, 64})->Args({128, 64})->Args({256, 64});

static void BM_conv3x3_train_step(benchmark::State& state) {
  const i64 hw = state.range(0), c = state.range(1);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Tensor x = tape.leaf(random_tensor({1, c, hw, hw}, 1));
    ad::Tensor w = tape.leaf(random_tensor({c, c, 3, 3}, 2));
    ad::Tensor loss = ad::mean(ad::square(ad::conv2d(x, w, ad::Padding::Replicate)));
    auto grads = tape.backward(loss);
    benchmark::DoNotOptimize(grads.of(w).data());
  }
  state.SetItemsProcessed(state.iterations() * 6 * c * c * 9 * hw * hw);
}
BENCHMARK(BM_conv3x3_train_step)->Args({64, 64})->Args({128, 64});

static void BM_conv1x1_forward(benchmark::State& state) {
  const i64 hw = state.range(0);
  const ad::Tensor x = random_tensor({1, 64, hw, hw}, 1);
  const ad::Tensor w = random_tensor({4, 64, 1, 1}, 2);
  for (auto _ : state) {
    ad::Tensor y = ad::conv2d(x, w, ad::Padding::Zero);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_conv1x1_forward)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
