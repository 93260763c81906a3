#include <benchmark/benchmark.h>

#include <random>

#include "manner/attention.hpp"
#include "manner/loss.hpp"
#include "manner/model.hpp"
#include "manner/ops.hpp"

using namespace manner;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.mutable_data()) v = static_cast<Scalar>(dist(rng));
  return t;
}

void BM_Conv1dPointwise(benchmark::State& state) {
  const auto ch = state.range(0);
  const Tensor x = random_tensor({1, ch, 16000}, 1);
  const Tensor w = random_tensor({ch, ch, 1}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, Tensor(), 1, 0));
  state.SetItemsProcessed(state.iterations() * ch * ch * 16000);
}
BENCHMARK(BM_Conv1dPointwise)->Arg(60)->Arg(240)->Unit(benchmark::kMillisecond);

void BM_Conv1dStrided(benchmark::State& state) {
  const Tensor x = random_tensor({1, 60, 64000}, 3);
  const Tensor w = random_tensor({60, 60, 8}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, Tensor(), 4, 2));
}
BENCHMARK(BM_Conv1dStrided)->Unit(benchmark::kMillisecond);

void BM_Depthwise(benchmark::State& state) {
  const Tensor x = random_tensor({1, 240, 16000}, 5);
  const Tensor w = random_tensor({240, 1, 31}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, Tensor(), 1, 15, 240));
}
BENCHMARK(BM_Depthwise)->Unit(benchmark::kMillisecond);

void BM_MABlock(benchmark::State& state) {
  ParameterTree tree;
  ParamBuilder b(tree, 0);
  const MABlock block = MABlock::create(b, 120, 64, AttentionPaths{});
  const Tensor x = random_tensor({1, 120, state.range(0)}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(block.forward(x));
}
BENCHMARK(BM_MABlock)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.variant = state.range(1) ? Variant::kSmall : Variant::kFull;
  const MannerModel model = build_model(cfg, 0);
  const Tensor x = random_tensor({1, 1, state.range(0) * 16000}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, false));
}
BENCHMARK(BM_ModelForward)->Args({1, 0})->Args({1, 1})->Args({4, 0})->Args({4, 1})->Unit(benchmark::kMillisecond);

void BM_MultiResLoss(benchmark::State& state) {
  const Tensor y = random_tensor({64000}, 9);
  const Tensor y_hat = random_tensor({64000}, 10);
  const auto configs = default_resolutions();
  for (auto _ : state) benchmark::DoNotOptimize(multires_stft_loss(y, y_hat, configs));
}
BENCHMARK(BM_MultiResLoss)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
