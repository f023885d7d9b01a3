#include <benchmark/benchmark.h>

#include <random>

#include "bcnn/model.hpp"
#include "bcnn/objective.hpp"

namespace {

using namespace bcnn;

LabelTree tree_for(Preset p) {
  if (p == Preset::A) return LabelTree({5, 10}, {{0, 1, 2, 2, 3, 4, 0, 1, 4, 3}});
  return LabelTree({2, 7, 10}, {{0, 0, 0, 1, 1, 1, 1}, {0, 1, 3, 4, 5, 4, 6, 5, 2, 1}});
}

// One training step's worth of forward and backward for a 128-sample batch.
// args: preset (0 = A, 1 = B), width divisor
void BM_TrainStep(benchmark::State& state) {
  const auto preset = state.range(0) == 0 ? Preset::A : Preset::B;
  const auto tree = tree_for(preset);
  auto model = build_preset<float>({preset, static_cast<std::size_t>(state.range(1))}, tree, 1);
  Shape shape = model.sample_shape();
  shape.insert(shape.begin(), 128);
  Tensor x(shape);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : x.data()) v = u(rng);
  Labels fine(128);
  for (auto& l : fine) l = rng() % 10;
  const auto targets = tree.derive_targets(fine);
  const double w = 1.0 / static_cast<double>(tree.levels());

  for (auto _ : state) {
    const auto probs = model.forward(x, Mode::Train);
    std::vector<Tensor> grads;
    for (std::size_t k = 0; k < probs.size(); ++k) grads.push_back(cross_entropy_logit_grad(probs[k], targets[k], w));
    model.backward(grads);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 128));
}
BENCHMARK(BM_TrainStep)->Args({0, 1})->Args({0, 4})->Args({1, 4})->Unit(benchmark::kMillisecond);

void BM_EvalForward(benchmark::State& state) {
  const auto preset = state.range(0) == 0 ? Preset::A : Preset::B;
  auto model = build_preset<float>({preset, static_cast<std::size_t>(state.range(1))}, tree_for(preset), 1);
  Shape shape = model.sample_shape();
  shape.insert(shape.begin(), 500);
  Tensor x(shape);
  x.fill(0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, Mode::Eval));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 500));
}
BENCHMARK(BM_EvalForward)->Args({0, 1})->Args({1, 4})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
