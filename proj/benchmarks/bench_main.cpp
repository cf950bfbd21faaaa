// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "xmal/data.hpp"
#include "xmal/objective.hpp"
#include "xmal/rng.hpp"
#include "xmal/tha.hpp"

namespace xmal {
namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = rng.uniform_matrix(n, n, -1.0, 1.0);
  const Matrix b = rng.uniform_matrix(n, n, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(32)->Arg(64);

void BM_Attend(benchmark::State& state) {
  Rng rng(2);
  const Matrix q = rng.uniform_matrix(8, 32, -1.0, 1.0);
  const Matrix c = rng.uniform_matrix(5, 32, -1.0, 1.0);
  const AttentionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(attend(q, c, cfg));
}
BENCHMARK(BM_Attend);

Dataset bench_data(std::size_t pairs) {
  SynthConfig sc;
  sc.pairs = pairs;
  return generate(sc);
}

void BM_ForwardBackward(benchmark::State& state) {
  const Dataset data = bench_data(static_cast<std::size_t>(state.range(0)));
  const ModelConfig mc;
  const ObjectiveConfig oc;
  const Model model = Model::initialize(mc, 7);
  std::vector<const PairItem*> batch;
  for (const PairItem& it : data.items) batch.push_back(&it);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Binder b(tape, model.params);
    const BatchForward fwd = forward_batch(b, mc, oc, batch);
    tape.backward(fwd.total);
    benchmark::DoNotOptimize(b.gradients());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_BatchSimilarity(benchmark::State& state) {
  const Dataset data = bench_data(32);
  const Model model = Model::initialize(ModelConfig{}, 7);
  const std::vector<EmbeddingItem> enc = encode_items(model, data.items);
  const auto threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        batch_similarity(model, std::span<const EmbeddingItem>(enc), SimilarityMode::tha_dcr, threads));
  }
}
BENCHMARK(BM_BatchSimilarity)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace xmal

BENCHMARK_MAIN();
