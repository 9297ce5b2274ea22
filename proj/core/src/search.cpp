#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "damr/error.hpp"
#include "damr/mcts.hpp"
#include "damr/training.hpp"

namespace damr::mcts {

PathScorer::PathScorer(const kg::KnowledgeGraph& kg, scorer::ScorerParams& params,
                       const embed::Embedder& embedder, const std::string& question)
    : kg_(&kg), params_(&params), embedder_(&embedder), question_(embedder(question)) {
  if (question_->size() != params.dims.d_in) {
    throw InputError("question embedding dimension " + std::to_string(question_->size()) +
                     " does not match scorer input " + std::to_string(params.dims.d_in));
  }
  question_proj_ = scorer::project(params, *question_);
}

const scorer::Mat& PathScorer::projection(kg::RelationId r) {
  auto it = projections_.find(r);
  if (it == projections_.end()) {
    const auto z = (*embedder_)(kg_->relation_label(r));
    it = projections_.emplace(r, scorer::project(*params_, *z)).first;
  }
  return it->second;
}

double PathScorer::score(std::span<const kg::RelationId> path) {
  const std::vector<std::vector<kg::RelationId>> one{{path.begin(), path.end()}};
  return score_all(one).front();
}

std::vector<double> PathScorer::score_all(std::span<const std::vector<kg::RelationId>> paths) {
  std::set<std::vector<kg::RelationId>> pending;
  std::vector<const std::vector<kg::RelationId>*> missing;
  std::vector<std::vector<const scorer::Mat*>> rows;
  for (const auto& path : paths) {
    if (scores_.contains(path) || !pending.insert(path).second) continue;
    missing.push_back(&path);
    auto& r = rows.emplace_back();
    for (auto rel : path) r.push_back(&projection(rel));
  }
  if (!missing.empty()) {
    const auto fresh = scorer::score_projected(*params_, question_proj_, rows);
    evaluations_ += missing.size();
    for (std::size_t j = 0; j < missing.size(); ++j) scores_.emplace(*missing[j], fresh[j]);
  }
  std::vector<double> out;
  out.reserve(paths.size());
  for (const auto& path : paths) out.push_back(scores_.at(path));
  return out;
}

std::vector<embed::EmbeddingPtr> PathScorer::embeddings(std::span<const kg::RelationId> path) const {
  std::vector<embed::EmbeddingPtr> out;
  for (auto r : path) out.push_back((*embedder_)(kg_->relation_label(r)));
  return out;
}

void PathScorer::invalidate() {
  projections_.clear();
  scores_.clear();
  question_proj_ = scorer::project(*params_, *question_);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::optional<double> simulate(const SearchTree& tree, NodeIndex index, const kg::KnowledgeGraph& kg,
                               PathScorer& scorer, const SearchConfig& config,
                               std::mt19937_64& rng) {
  const SearchNode& node = tree.node(index);
  if (node.virtual_root) return std::nullopt;
  auto path = tree.relation_path(index);
  kg::EntityId at = node.entity;
  std::vector<kg::Edge> pool;

  for (std::size_t depth = node.depth; depth < config.max_len; ++depth) {
    const auto edges = kg.neighbors(at);
    if (edges.empty()) break;
    pool.assign(edges.begin(), edges.end());
    if (pool.size() > config.branch_cap) {
      // Partial Fisher-Yates, then restore adjacency order for tie-breaking.
      for (std::size_t i = 0; i < config.branch_cap; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      pool.resize(config.branch_cap);
      std::sort(pool.begin(), pool.end());
    }
    std::vector<std::vector<kg::RelationId>> extended(pool.size(), path);
    for (std::size_t i = 0; i < pool.size(); ++i) extended[i].push_back(pool[i].relation);
    const auto scores = scorer.score_all(extended);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      if (scores[i] > scores[best]) best = i;
    }
    path = std::move(extended[best]);
    at = pool[best].target;
  }
  if (path.empty()) return std::nullopt;
  return logistic(scorer.score(path));
}

SearchResult search(const kg::KnowledgeGraph& kg, const std::string& question,
                    std::span<const kg::EntityId> topics, planner::Planner& planner,
                    scorer::ScorerParams& params, const embed::Embedder& embedder,
                    const SearchConfig& config, std::uint64_t seed) {
  config.validate(params.dims.l_max);
  for (auto t : topics) {
    if (!kg.valid(t)) throw InputError("topic entity id " + std::to_string(t.value) + " is not in the graph");
  }
  SearchTree tree(topics);
  PathScorer scorer(kg, params, embedder, question);
  std::mt19937_64 rng(seed);
  SearchResult result;
  std::optional<training::AdamState> adam;

  for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
    const auto path = select_leaf(tree, config);
    const NodeIndex leaf = path.back();
    std::vector<NodeIndex> rollout_from;
    if (!tree.node(leaf).expanded && tree.node(leaf).depth < config.max_len) {
      auto ex = expand(tree, leaf, kg, question, planner, config);
      if (kg::outgoing_relations(kg, tree.node(leaf).entity).size() > 0) ++result.stats.expansions;
      if (ex.consulted_planner) ++result.stats.planner_consultations;
      result.usage += ex.usage;
      rollout_from = ex.children;
    }
    if (rollout_from.empty()) {
      if (auto reward = simulate(tree, leaf, kg, scorer, config, rng)) {
        backpropagate(tree, path, *reward, config.mode);
        ++result.stats.rollouts;
      }
    } else {
      auto extended = path;
      extended.push_back(0);
      for (NodeIndex child : rollout_from) {
        extended.back() = child;
        if (auto reward = simulate(tree, child, kg, scorer, config, rng)) {
          backpropagate(tree, extended, *reward, config.mode);
          ++result.stats.rollouts;
        }
      }
    }

    if (config.finetune && iter % config.finetune_period == 0) {
      const auto pairs = sample_pseudo_pairs(tree, config, rng);
      if (!pairs.empty()) {
        std::vector<training::TrainTriplet> batch;
        batch.reserve(pairs.size());
        for (const auto& p : pairs) {
          batch.push_back({scorer.question_embedding(), scorer.embeddings(p.positive),
                           scorer.embeddings(p.negative)});
        }
        if (!adam) adam = training::AdamState::fresh(params.dims);
        for (std::size_t e = 0; e < config.finetune_epochs; ++e) {
          training::finetune_step(params, batch, *adam, config.finetune_lr);
          ++result.stats.finetune_steps;
        }
        scorer.invalidate();
      }
    }
  }

  result.answers = extract_answers(tree, scorer, config);
  result.stats.nodes = tree.size();
  for (const auto& n : tree.nodes()) {
    result.stats.max_depth = std::max<std::size_t>(result.stats.max_depth, n.depth);
  }
  return result;
}

}  // namespace damr::mcts
