#include "benchmark/benchmark.h"
#include "jetr/vector_store.hpp"

namespace {

using namespace jetr;

VectorStore make_store(std::size_t docs, std::size_t dim) {
  SplitMix64 rng(11);
  VectorStore store;
  for (std::size_t i = 0; i < docs; ++i) {
    DocRecord rec;
    rec.doc_id = "doc_" + std::to_string(i);
    rec.modality = i % 4 == 0 ? Modality::Image : Modality::Text;
    rec.lesson_id = "lesson_" + std::to_string(i % 16);
    rec.embedding.resize(dim);
    for (double& v : rec.embedding) v = rng.uniform(-1, 1);
    store.insert(std::move(rec));
  }
  return store;
}

void BM_TopkRaw(benchmark::State& state) {
  const std::size_t docs = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 128;
  const VectorStore store = make_store(docs, dim);
  SplitMix64 rng(12);
  Vector query(dim);
  for (double& v : query) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.topk(query, 10));
  }
}
BENCHMARK(BM_TopkRaw)->Arg(100)->Arg(1000)->Arg(10000);

void BM_TopkEnhanced(benchmark::State& state) {
  const std::size_t docs = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 128;
  const VectorStore store = make_store(docs, dim);
  const EnhancerParams params =
      init_enhancer(1, EnhancerDims{dim, 256, 512, dim});
  SplitMix64 rng(12);
  Vector query(dim);
  for (double& v : query) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.topk(query, 10, std::nullopt, &params));
  }
}
BENCHMARK(BM_TopkEnhanced)->Arg(100)->Arg(1000);

}  // namespace
