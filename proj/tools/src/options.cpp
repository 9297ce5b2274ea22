#include "options.hpp"

#include <filesystem>

#include <spdlog/spdlog.h>

#include "damr/error.hpp"
#include "damr/evaluate.hpp"
#include "damr/remote.hpp"

namespace damr::cli {

void add_embed_options(CLI::App& app, EmbedOptions& opts) {
  app.add_option("--embedder", opts.kind, "Embedding provider")
      ->check(CLI::IsMember({"stub", "remote"}))
      ->capture_default_str();
  app.add_option("--embed-seed", opts.seed, "Seed of the stub embedder")->capture_default_str();
  app.add_option("--embed-model", opts.model, "Remote embedding model name")
      ->capture_default_str();
  app.add_option("--embed-cache", opts.cache, "JSON-lines embedding cache (read and updated)");
}

void add_planner_options(CLI::App& app, PlannerOptions& opts) {
  app.add_option("--planner", opts.kind, "Relation planner")
      ->check(CLI::IsMember({"llm", "sim", "mock"}))
      ->capture_default_str();
  app.add_option("--noise", opts.noise, "Mock planner: probability of demoting gold relations")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--llm-model", opts.llm_model, "Chat model for --planner llm")
      ->capture_default_str();
}

void add_search_options(CLI::App& app, SearchOptions& opts) {
  auto& c = opts.config;
  app.add_option("--iters", c.iterations, "MCTS iterations per question")->capture_default_str();
  app.add_option("--top-k", c.top_k, "Relations kept per expansion")->capture_default_str();
  app.add_option("--max-len", c.max_len, "Maximum path length")->capture_default_str();
  app.add_option("--c", c.c, "UCT exploration constant")->capture_default_str();
  app.add_option("--mode", opts.mode, "Value backpropagation mode")
      ->check(CLI::IsMember({"literal-avg", "classic-sum"}))
      ->capture_default_str();
  app.add_option("--finetune-period", c.finetune_period, "Iterations between fine-tune steps")
      ->capture_default_str();
  app.add_option("--pairs", c.pairs_per_finetune, "Pseudo pairs per fine-tune step")
      ->capture_default_str();
  app.add_option("--finetune-epochs", c.finetune_epochs, "Optimizer steps per fine-tune round")
      ->capture_default_str();
  app.add_option("--finetune-lr", c.finetune_lr, "Online fine-tuning learning rate")
      ->capture_default_str();
  app.add_option("--branch-cap", c.branch_cap, "Children per expansion / rollout fan-out")
      ->capture_default_str();
  app.add_option("--top-m", c.top_m, "Answers kept per question")->capture_default_str();
  app.add_flag("--no-finetune", opts.no_finetune, "Disable online fine-tuning");
}

mcts::SearchConfig SearchOptions::resolve() const {
  mcts::SearchConfig c = config;
  c.mode = mcts::parse_backprop_mode(mode);
  c.finetune = !no_finetune;
  return c;
}

EmbedContext::EmbedContext(const EmbedOptions& opts, std::size_t dim) : cache_path_(opts.cache) {
  if (opts.kind == "stub") {
    provider_ = std::make_unique<embed::StubProvider>(opts.seed, dim);
  } else {
    provider_ = std::make_unique<embed::RemoteProvider>(remote::RemoteConfig::from_env(opts.model), dim);
  }
  if (!cache_path_.empty() && std::filesystem::exists(cache_path_)) {
    cache_ = std::make_unique<embed::EmbeddingCache>(embed::EmbeddingCache::load(cache_path_));
  } else {
    cache_ = std::make_unique<embed::EmbeddingCache>();
  }
}

EmbedContext::~EmbedContext() {
  if (cache_path_.empty()) return;
  try {
    cache_->save(cache_path_);
  } catch (const std::exception& e) {
    spdlog::error("could not save embedding cache: {}", e.what());
  }
}

GoldPaths gold_paths(const kg::KnowledgeGraph& kg, const std::vector<harness::QAItem>& items,
                     std::size_t max_len) {
  GoldPaths out;
  for (const auto& item : items) {
    auto& dst = out[item.question];
    for (auto& p : harness::gold_relation_paths(kg, item, max_len)) dst.push_back(std::move(p));
  }
  return out;
}

std::unique_ptr<planner::Planner> make_planner(const PlannerOptions& opts,
                                               const embed::Embedder& embedder, GoldPaths gold,
                                               std::uint64_t seed) {
  if (opts.kind == "sim") return std::make_unique<planner::SimilarityPlanner>(embedder);
  if (opts.kind == "mock") {
    return std::make_unique<planner::OraclePlanner>(std::move(gold), opts.noise, seed);
  }
  return std::make_unique<planner::LlmPlanner>(remote::RemoteConfig::from_env(opts.llm_model),
                                               embedder);
}

}  // namespace damr::cli
