#include <benchmark/benchmark.h>

#include <random>

#include "damr/scorer.hpp"
#include "damr/training.hpp"

using namespace damr;

namespace {

embed::EmbeddingPtr noise(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return std::make_shared<const embed::Embedding>(std::move(v));
}

std::vector<training::TrainTriplet> batch(std::size_t dim, std::size_t size, std::size_t len) {
  std::mt19937_64 rng(1);
  std::vector<training::TrainTriplet> out;
  for (std::size_t i = 0; i < size; ++i) {
    training::TrainTriplet t{noise(rng, dim), {}, {}};
    for (std::size_t h = 0; h < len; ++h) {
      t.positive.push_back(noise(rng, dim));
      t.negative.push_back(noise(rng, dim));
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Default model size; range(0) is the path length.
void BM_ScoreBatch(benchmark::State& state) {
  const scorer::ScorerDims dims;
  const auto params = scorer::init_params(dims, 1);
  const auto triplets = batch(dims.d_in, 32, static_cast<std::size_t>(state.range(0)));
  std::vector<std::vector<embed::EmbeddingPtr>> paths;
  for (const auto& t : triplets) paths.push_back(t.positive);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scorer::score_batch(params, *triplets[0].question, paths));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(paths.size()));
}
BENCHMARK(BM_ScoreBatch)->Arg(1)->Arg(3)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_Backward(benchmark::State& state) {
  const scorer::ScorerDims dims;
  const auto params = scorer::init_params(dims, 1);
  const auto triplets = batch(dims.d_in, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(training::backward(params, triplets));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  const scorer::ScorerDims dims;
  auto params = scorer::init_params(dims, 1);
  const auto grads = scorer::init_params(dims, 2);
  auto adam = training::AdamState::fresh(dims);
  for (auto _ : state) training::adam_step(params, grads, adam, 1e-6);
}
BENCHMARK(BM_AdamStep)->Unit(benchmark::kMillisecond);

}  // namespace
