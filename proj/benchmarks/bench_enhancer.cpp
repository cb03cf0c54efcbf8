#include "benchmark/benchmark.h"
#include "jetr/enhancer.hpp"

namespace {

using namespace jetr;

Vector random_input(std::size_t dim, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vector x(dim);
  for (double& v : x) v = rng.uniform(-1, 1);
  return x;
}

void BM_EnhanceForward(benchmark::State& state) {
  const std::size_t dim = static_cast<std::size_t>(state.range(0));
  const EnhancerDims dims{dim, 256, 512, dim};
  const EnhancerParams params = init_enhancer(1, dims);
  const Vector x = random_input(dim, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enhance(params, x));
  }
}
BENCHMARK(BM_EnhanceForward)->Arg(32)->Arg(256)->Arg(1024);

void BM_EnhanceBackward(benchmark::State& state) {
  const std::size_t dim = static_cast<std::size_t>(state.range(0));
  const EnhancerDims dims{dim, 256, 512, dim};
  const EnhancerParams params = init_enhancer(1, dims);
  const Vector x = random_input(dim, 2);
  const Vector grad_z = random_input(dim, 3);
  ForwardCache cache;
  enhance(params, x, &cache);
  EnhancerGrads grads = make_zero_params(dims);
  for (auto _ : state) {
    enhancer_backward(params, cache, grad_z, grads);
    benchmark::DoNotOptimize(grads.w1.values.data());
  }
}
BENCHMARK(BM_EnhanceBackward)->Arg(32)->Arg(256)->Arg(1024);

void BM_InitEnhancer(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(init_enhancer(7, EnhancerDims{}));
  }
}
BENCHMARK(BM_InitEnhancer);

}  // namespace
