#include <benchmark/benchmark.h>

#include "damr/embed.hpp"
#include "damr/evaluate.hpp"
#include "damr/mcts.hpp"
#include "damr/planner.hpp"
#include "damr/synth.hpp"

using namespace damr;

namespace {

// One question of the default synthetic benchmark with the oracle planner;
// range(0) toggles online fine-tuning.
void BM_SearchQuestion(benchmark::State& state) {
  harness::SynthSpec spec;
  spec.questions = 1;
  const auto data = harness::generate_synthetic(spec);
  const auto& item = data.items.front();
  std::unordered_map<std::string, std::vector<std::vector<std::string>>> gold;
  gold[item.question] = harness::gold_relation_paths(data.kg, item, 4);
  planner::OraclePlanner planner(std::move(gold), 0.0, 0);

  const scorer::ScorerDims dims;
  const auto base = scorer::init_params(dims, 1);
  embed::StubProvider provider(0, dims.d_in);
  embed::EmbeddingCache cache;
  const embed::Embedder embedder(provider, cache);
  mcts::SearchConfig config;
  config.finetune = state.range(0) != 0;
  const std::vector<kg::EntityId> topics{data.kg.entity(item.topic_entities.front())};

  for (auto _ : state) {
    auto params = base;
    benchmark::DoNotOptimize(
        mcts::search(data.kg, item.question, topics, planner, params, embedder, config, 0));
  }
}
BENCHMARK(BM_SearchQuestion)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
