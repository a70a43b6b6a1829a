#include <benchmark/benchmark.h>

#include <random>

#include "cocorrect/nn.hpp"

namespace {

using cocorrect::nn::Matrix;

Matrix random_batch(int n, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0F, 1.0F);
  Matrix x(n, width);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

cocorrect::nn::BackboneSpec spec_for(int scale) {
  cocorrect::nn::BackboneSpec spec;
  spec.conv_channels = {scale, scale, 2 * scale, 2 * scale, 4 * scale, 4 * scale};
  return spec;
}

void BM_Cnn6Forward(benchmark::State& state) {
  auto net = cocorrect::nn::make_network(spec_for(static_cast<int>(state.range(0))), {1, 28, 28}, 10);
  net.init(1);
  const Matrix x = random_batch(128, 784, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x).data());
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Cnn6Forward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Cnn6TrainStep(benchmark::State& state) {
  auto net = cocorrect::nn::make_network(spec_for(static_cast<int>(state.range(0))), {1, 28, 28}, 10);
  net.init(1);
  const Matrix x = random_batch(128, 784, 2);
  std::vector<int> active(128);
  for (int i = 0; i < 128; ++i) active[i] = i;
  Matrix dlogits = random_batch(128, 10, 3);
  for (auto _ : state) {
    net.forward(x);
    net.backward(dlogits, active);
    benchmark::DoNotOptimize(net.gradients().data());
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Cnn6TrainStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
