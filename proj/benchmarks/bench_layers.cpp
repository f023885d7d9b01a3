#include <benchmark/benchmark.h>

#include <random>

#include "bcnn/layers.hpp"

namespace {

using namespace bcnn;

Tensor random_input(const Shape& shape) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> dist;
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// args: batch, spatial size, in channels, filters
void BM_Conv2dForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), hw = static_cast<std::size_t>(state.range(1));
  const auto cin = static_cast<std::size_t>(state.range(2)), cout = static_cast<std::size_t>(state.range(3));
  auto rng = make_rng(0, "bench");
  Conv2d<float> conv(cin, cout, rng);
  const auto x = random_input({n, hw, hw, cin});
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, Mode::Train));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Conv2dForward)->Args({128, 28, 1, 32})->Args({128, 14, 32, 64})->Args({128, 32, 3, 16})
    ->Args({128, 16, 32, 32})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), hw = static_cast<std::size_t>(state.range(1));
  const auto cin = static_cast<std::size_t>(state.range(2)), cout = static_cast<std::size_t>(state.range(3));
  auto rng = make_rng(0, "bench");
  Conv2d<float> conv(cin, cout, rng);
  const auto x = random_input({n, hw, hw, cin});
  const auto g = random_input(conv.output_shape(x.shape()));
  conv.forward(x, Mode::Train);
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(g));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Conv2dBackward)->Args({128, 28, 1, 32})->Args({128, 14, 32, 64})->Unit(benchmark::kMillisecond);

void BM_DenseForwardBackward(benchmark::State& state) {
  const auto in = static_cast<std::size_t>(state.range(0)), out = static_cast<std::size_t>(state.range(1));
  auto rng = make_rng(0, "bench");
  Dense<float> dense(in, out, rng);
  const auto x = random_input({128, in});
  const auto g = random_input({128, out});
  for (auto _ : state) {
    benchmark::DoNotOptimize(dense.forward(x, Mode::Train));
    benchmark::DoNotOptimize(dense.backward(g));
  }
}
BENCHMARK(BM_DenseForwardBackward)->Args({3136, 1024})->Args({1024, 10})->Unit(benchmark::kMicrosecond);

void BM_MaxPool2(benchmark::State& state) {
  MaxPool2<float> pool;
  const auto x = random_input({128, 28, 28, 32});
  for (auto _ : state) {
    auto y = pool.forward(x, Mode::Train);
    benchmark::DoNotOptimize(pool.backward(y));
  }
}
BENCHMARK(BM_MaxPool2)->Unit(benchmark::kMillisecond);

void BM_BatchNormTrain(benchmark::State& state) {
  BatchNorm<float> bn(64);
  const auto x = random_input({128, 14, 14, 64});
  for (auto _ : state) {
    auto y = bn.forward(x, Mode::Train);
    benchmark::DoNotOptimize(bn.backward(y));
  }
}
BENCHMARK(BM_BatchNormTrain)->Unit(benchmark::kMillisecond);

}  // namespace
