#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "damr/dataset.hpp"
#include "damr/embed.hpp"
#include "damr/kg.hpp"
#include "damr/mcts.hpp"
#include "damr/planner.hpp"

namespace damr::cli {

struct EmbedOptions {
  std::string kind = "stub";
  std::uint64_t seed = 0;
  std::string model = "text-embedding";
  std::string cache;
};

struct PlannerOptions {
  std::string kind = "sim";
  double noise = 0.0;
  std::string llm_model = "gpt-4.1";
};

struct SearchOptions {
  mcts::SearchConfig config;
  std::string mode = "literal-avg";
  bool no_finetune = false;

  mcts::SearchConfig resolve() const;
};

void add_embed_options(CLI::App& app, EmbedOptions& opts);
void add_planner_options(CLI::App& app, PlannerOptions& opts);
void add_search_options(CLI::App& app, SearchOptions& opts);

// Owns a provider and cache; the Embedder view stays valid for its lifetime.
class EmbedContext {
 public:
  EmbedContext(const EmbedOptions& opts, std::size_t dim);
  ~EmbedContext();

  embed::Embedder embedder() { return embed::Embedder(*provider_, *cache_); }

 private:
  std::unique_ptr<embed::EmbeddingProvider> provider_;
  std::unique_ptr<embed::EmbeddingCache> cache_;
  std::string cache_path_;
};

using GoldPaths = std::unordered_map<std::string, std::vector<std::vector<std::string>>>;

GoldPaths gold_paths(const kg::KnowledgeGraph& kg, const std::vector<harness::QAItem>& items,
                     std::size_t max_len);

std::unique_ptr<planner::Planner> make_planner(const PlannerOptions& opts,
                                               const embed::Embedder& embedder, GoldPaths gold,
                                               std::uint64_t seed);

}  // namespace damr::cli
