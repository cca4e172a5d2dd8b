#include <benchmark/benchmark.h>

#include "txn/descriptor.hpp"
#include "txn/generator.hpp"
#include "txn/layers.hpp"
#include "txn/loss.hpp"
#include "txn/ops.hpp"
#include "txn/random.hpp"

namespace {

using namespace txn;

Tensor<float> random_input(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Tensor<float>::from_data(std::move(shape), std::move(v), requires_grad);
}

void BM_Conv3x3Forward(benchmark::State& state) {
  const auto c = state.range(0);
  const auto s = state.range(1);
  ConvSpec<float> spec;
  spec.weight = random_input({c, c, 3, 3}, 1);
  spec.bias = random_input({c}, 2);
  spec.padding = PaddingMode::kCircular;
  const auto x = random_input({4, c, s, s}, 3);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, spec));
  state.SetItemsProcessed(state.iterations() * 4 * c * c * 9 * s * s);
}
BENCHMARK(BM_Conv3x3Forward)->Args({8, 32})->Args({16, 64})->Args({40, 64});

void BM_Conv3x3Backward(benchmark::State& state) {
  const auto c = state.range(0);
  const auto s = state.range(1);
  ConvSpec<float> spec;
  spec.weight = random_input({c, c, 3, 3}, 1, true);
  spec.bias = random_input({c}, 2, true);
  spec.padding = PaddingMode::kCircular;
  const auto x = random_input({4, c, s, s}, 3, true);
  for (auto _ : state) {
    auto y = sum(conv2d(x, spec));
    backward(y);
  }
}
BENCHMARK(BM_Conv3x3Backward)->Args({8, 32})->Args({16, 64});

void BM_GeneratorForward(benchmark::State& state) {
  auto g = GeneratorParams<float>::init(GeneratorArch::texture_default(), 4);
  g.set_training(false);
  const auto s = state.range(0);
  const auto z = sample_noise<float>(s, s, g.arch.scales(), 1, 1.0f, 5);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(z));
}
BENCHMARK(BM_GeneratorForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DescriptorForward(benchmark::State& state) {
  const auto net = DescriptorNet<float>::tiny();
  const auto s = state.range(0);
  const auto x = random_input({1, 3, s, s}, 6);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_DescriptorForward)->Arg(64)->Arg(256);

void BM_Gram(benchmark::State& state) {
  const auto c = state.range(0);
  const auto x = random_input({4, c, 32, 32}, 7);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(gram(x));
}
BENCHMARK(BM_Gram)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
