#include <vector>

#include "benchmark/benchmark.h"
#include "jetr/losses.hpp"

namespace {

using namespace jetr;

std::vector<PairSample> make_pairs(std::size_t n) {
  SplitMix64 rng(21);
  std::vector<PairSample> pairs(n);
  for (PairSample& p : pairs) {
    p.s_hat_i = rng.uniform(-1, 1);
    p.s_hat_j = rng.uniform(-1, 1);
    p.gen_loss_i = rng.uniform(0, 2);
    p.gen_loss_j = rng.uniform(0, 2);
  }
  return pairs;
}

void BM_RankLoss(benchmark::State& state) {
  const auto pairs = make_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rank_loss(pairs));
  }
}
BENCHMARK(BM_RankLoss)->Arg(45)->Arg(720)->Arg(4560);

void BM_GenCrossEntropy(benchmark::State& state) {
  SplitMix64 rng(22);
  Vector logits(static_cast<std::size_t>(state.range(0)));
  for (double& v : logits) v = rng.uniform(-5, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_cross_entropy(logits, 0));
  }
}
BENCHMARK(BM_GenCrossEntropy)->Arg(2)->Arg(4)->Arg(7);

}  // namespace
