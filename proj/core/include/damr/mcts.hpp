#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "damr/embed.hpp"
#include "damr/kg.hpp"
#include "damr/planner.hpp"
#include "damr/scorer.hpp"

namespace damr::mcts {

enum class BackpropMode { literal_avg, classic_sum };

BackpropMode parse_backprop_mode(std::string_view s);
std::string_view to_string(BackpropMode m);

struct SearchConfig {
  std::size_t iterations = 30;
  std::size_t top_k = 3;
  std::size_t max_len = 4;
  double c = std::numbers::sqrt2;
  BackpropMode mode = BackpropMode::literal_avg;
  bool finetune = true;
  std::size_t finetune_period = 1;
  std::size_t pairs_per_finetune = 8;
  std::size_t finetune_epochs = 10;  // optimizer steps per sampled pair set
  double finetune_lr = 1e-5;
  std::size_t branch_cap = 16;
  std::size_t top_m = 10;

  void validate(std::size_t l_max) const;  // throws InputError
};

using NodeIndex = std::uint32_t;

struct SearchNode {
  kg::EntityId entity;
  std::optional<kg::RelationId> in_relation;
  std::optional<NodeIndex> parent;
  std::uint32_t depth = 0;  // hops from the topic entity
  std::uint64_t n = 0;
  double w = 0.0;
  double reward_sum = 0.0;
  std::vector<NodeIndex> children;
  bool expanded = false;
  bool virtual_root = false;  // joins several topic entities
};

class SearchTree {
 public:
  // One topic: that topic is the root. Several: a virtual root whose
  // children are the topics (all at depth 0).
  explicit SearchTree(std::span<const kg::EntityId> topics);

  NodeIndex root() const { return 0; }
  const SearchNode& node(NodeIndex i) const { return nodes_.at(i); }
  SearchNode& node(NodeIndex i) { return nodes_.at(i); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<SearchNode>& nodes() const { return nodes_; }

  NodeIndex add_child(NodeIndex parent, kg::RelationId r, kg::EntityId e);
  std::vector<kg::RelationId> relation_path(NodeIndex i) const;

 private:
  std::vector<SearchNode> nodes_;
};

// UCT value: w/n (or w under literal-avg) plus c * sqrt(ln N / n); +infinity
// for unvisited children.
double uct(const SearchNode& child, std::uint64_t parent_visits, double c, BackpropMode mode);

bool is_terminal(const SearchNode& node, const SearchConfig& config);

// Root-to-leaf node indices.
std::vector<NodeIndex> select_leaf(const SearchTree& tree, const SearchConfig& config);

struct Expansion {
  std::vector<NodeIndex> children;
  bool consulted_planner = false;
  planner::Usage usage;
};

Expansion expand(SearchTree& tree, NodeIndex node, const kg::KnowledgeGraph& kg,
                 const std::string& question, planner::Planner& planner,
                 const SearchConfig& config);

// Scores relation paths for one question with memoized projections and
// scores. Call invalidate() after the parameters change.
class PathScorer {
 public:
  PathScorer(const kg::KnowledgeGraph& kg, scorer::ScorerParams& params,
             const embed::Embedder& embedder, const std::string& question);

  double score(std::span<const kg::RelationId> path);
  // Cached scores are reused; the rest are evaluated together in one pass.
  std::vector<double> score_all(std::span<const std::vector<kg::RelationId>> paths);
  std::vector<embed::EmbeddingPtr> embeddings(std::span<const kg::RelationId> path) const;
  const embed::EmbeddingPtr& question_embedding() const { return question_; }
  scorer::ScorerParams& params() { return *params_; }
  void invalidate();

  std::uint64_t evaluations() const { return evaluations_; }

 private:
  const scorer::Mat& projection(kg::RelationId r);

  const kg::KnowledgeGraph* kg_;
  scorer::ScorerParams* params_;
  const embed::Embedder* embedder_;
  embed::EmbeddingPtr question_;
  scorer::Mat question_proj_;
  std::unordered_map<kg::RelationId, scorer::Mat> projections_;
  std::map<std::vector<kg::RelationId>, double> scores_;
  std::uint64_t evaluations_ = 0;
};

double logistic(double x);

// Greedy scorer-guided rollout; nullopt when no relation path exists (a topic
// with no outgoing edges).
std::optional<double> simulate(const SearchTree& tree, NodeIndex node, const kg::KnowledgeGraph& kg,
                               PathScorer& scorer, const SearchConfig& config,
                               std::mt19937_64& rng);

void backpropagate(SearchTree& tree, std::span<const NodeIndex> path, double reward,
                   BackpropMode mode);

struct PseudoPair {
  std::vector<kg::RelationId> positive;
  std::vector<kg::RelationId> negative;
  kg::EntityId positive_entity;
  kg::EntityId negative_entity;
  double gap = 0.0;
};

double search_value(const SearchNode& node);

std::vector<PseudoPair> sample_pseudo_pairs(const SearchTree& tree, const SearchConfig& config,
                                            std::mt19937_64& rng);

struct Answer {
  kg::EntityId entity;
  double score = 0.0;
  std::vector<kg::RelationId> path;
};

std::vector<Answer> extract_answers(const SearchTree& tree, PathScorer& scorer,
                                    const SearchConfig& config);

struct SearchStats {
  std::size_t nodes = 0;
  std::size_t expansions = 0;           // expand() on non-terminal nodes
  std::size_t planner_consultations = 0;  // expansions that needed pruning
  std::size_t rollouts = 0;
  std::size_t finetune_steps = 0;
  std::size_t max_depth = 0;
};

struct SearchResult {
  std::vector<Answer> answers;
  planner::Usage usage;
  SearchStats stats;
};

// The scorer parameters are fine-tuned in place; pass a copy to keep the
// original.
SearchResult search(const kg::KnowledgeGraph& kg, const std::string& question,
                    std::span<const kg::EntityId> topics, planner::Planner& planner,
                    scorer::ScorerParams& params, const embed::Embedder& embedder,
                    const SearchConfig& config, std::uint64_t seed);

}  // namespace damr::mcts
