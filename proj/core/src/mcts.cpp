#include "damr/mcts.hpp"

#include <algorithm>
#include <limits>

#include "damr/error.hpp"

namespace damr::mcts {

BackpropMode parse_backprop_mode(std::string_view s) {
  if (s == "literal-avg") return BackpropMode::literal_avg;
  if (s == "classic-sum") return BackpropMode::classic_sum;
  throw InputError("unknown backprop mode '" + std::string(s) + "'");
}

std::string_view to_string(BackpropMode m) {
  return m == BackpropMode::literal_avg ? "literal-avg" : "classic-sum";
}

void SearchConfig::validate(std::size_t l_max) const {
  if (iterations < 1) throw InputError("iterations must be >= 1");
  if (top_k < 1) throw InputError("top-k must be >= 1");
  if (max_len < 1 || max_len > l_max) {
    throw InputError("max path length must lie in [1, " + std::to_string(l_max) + "]");
  }
  if (finetune_period < 1) throw InputError("finetune period must be >= 1");
  if (finetune_epochs < 1) throw InputError("finetune epochs must be >= 1");
  if (branch_cap < 1) throw InputError("branch cap must be >= 1");
  if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("exploration constant must be >= 0");
}

SearchTree::SearchTree(std::span<const kg::EntityId> topics) {
  if (topics.empty()) throw InputError("search needs at least one topic entity");
  if (topics.size() == 1) {
    SearchNode root;
    root.entity = topics[0];
    nodes_.push_back(root);
    return;
  }
  SearchNode root;
  root.virtual_root = true;
  root.expanded = true;
  nodes_.push_back(root);
  for (auto t : topics) {
    SearchNode topic;
    topic.entity = t;
    topic.parent = 0;
    nodes_[0].children.push_back(static_cast<NodeIndex>(nodes_.size()));
    nodes_.push_back(topic);
  }
}

NodeIndex SearchTree::add_child(NodeIndex parent, kg::RelationId r, kg::EntityId e) {
  const auto idx = static_cast<NodeIndex>(nodes_.size());
  SearchNode child;
  child.entity = e;
  child.in_relation = r;
  child.parent = parent;
  child.depth = nodes_[parent].depth + 1;
  nodes_.push_back(child);
  nodes_[parent].children.push_back(idx);
  return idx;
}

std::vector<kg::RelationId> SearchTree::relation_path(NodeIndex i) const {
  std::vector<kg::RelationId> out;
  for (std::optional<NodeIndex> at = i; at; at = nodes_[*at].parent) {
    if (nodes_[*at].in_relation) out.push_back(*nodes_[*at].in_relation);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double uct(const SearchNode& child, std::uint64_t parent_visits, double c, BackpropMode mode) {
  if (child.n == 0) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(child.n);
  const double exploit = mode == BackpropMode::classic_sum ? child.w / n : child.w;
  const double parent = static_cast<double>(std::max<std::uint64_t>(parent_visits, 1));
  return exploit + c * std::sqrt(std::log(parent) / n);
}

bool is_terminal(const SearchNode& node, const SearchConfig& config) {
  if (node.virtual_root) return false;
  return node.depth >= config.max_len || (node.expanded && node.children.empty());
}

std::vector<NodeIndex> select_leaf(const SearchTree& tree, const SearchConfig& config) {
  std::vector<NodeIndex> path{tree.root()};
  while (true) {
    const SearchNode& at = tree.node(path.back());
    if (!at.expanded || is_terminal(at, config)) return path;
    NodeIndex best = at.children.front();
    double best_value = -std::numeric_limits<double>::infinity();
    for (NodeIndex c : at.children) {
      const double v = uct(tree.node(c), at.n, config.c, config.mode);
      if (v > best_value) {
        best_value = v;
        best = c;
      }
    }
    path.push_back(best);
  }
}

Expansion expand(SearchTree& tree, NodeIndex index, const kg::KnowledgeGraph& kg,
                 const std::string& question, planner::Planner& planner,
                 const SearchConfig& config) {
  Expansion out;
  SearchNode& node = tree.node(index);
  if (node.expanded) throw_precondition("node is already expanded");
  if (node.depth >= config.max_len) throw_precondition("cannot expand a node at max depth");
  node.expanded = true;

  const auto relations = kg::outgoing_relations(kg, node.entity);
  if (relations.empty()) return out;

  planner::PlannerQuery query;
  query.question = question;
  for (auto r : tree.relation_path(index)) query.current_path.push_back(kg.relation_label(r));
  for (auto r : relations) query.candidates.push_back({r, kg.relation_label(r)});
  query.k = config.top_k;
  const auto choice = planner.select_relations(query);
  out.usage = choice.usage;
  out.consulted_planner = choice.usage.llm_calls > 0;

  const kg::EntityId entity = tree.node(index).entity;
  for (auto r : choice.ranked) {
    for (const auto& edge : kg.neighbors(entity)) {
      if (edge.relation != r) continue;
      if (out.children.size() == config.branch_cap) return out;
      out.children.push_back(tree.add_child(index, r, edge.target));
    }
  }
  return out;
}

void backpropagate(SearchTree& tree, std::span<const NodeIndex> path, double reward,
                   BackpropMode mode) {
  if (!std::isfinite(reward) || reward < 0.0 || reward > 1.0) {
    throw_precondition("reward must lie in [0, 1]");
  }
  for (NodeIndex i : path) {
    SearchNode& n = tree.node(i);
    n.n += 1;
    n.reward_sum += reward;
  }
  for (std::size_t k = path.size(); k-- > 0;) {
    SearchNode& n = tree.node(path[k]);
    if (mode == BackpropMode::classic_sum) {
      n.w = n.reward_sum;
      continue;
    }
    if (k + 1 == path.size()) {
      n.w = n.reward_sum / static_cast<double>(n.n);
      continue;
    }
    double weighted = 0.0;
    double visits = 0.0;
    for (NodeIndex c : n.children) {
      const SearchNode& child = tree.node(c);
      weighted += static_cast<double>(child.n) * child.w;
      visits += static_cast<double>(child.n);
    }
    n.w = visits > 0.0 ? weighted / visits : n.reward_sum / static_cast<double>(n.n);
  }
}

double search_value(const SearchNode& node) {
  return node.n == 0 ? 0.0 : node.reward_sum / static_cast<double>(node.n);
}

std::vector<PseudoPair> sample_pseudo_pairs(const SearchTree& tree, const SearchConfig& config,
                                            std::mt19937_64& rng) {
  std::vector<NodeIndex> eligible;
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (!n.virtual_root && n.depth >= 1 && n.n >= 1) eligible.push_back(i);
  }
  if (eligible.size() < 2 || config.pairs_per_finetune == 0) return {};

  std::vector<std::vector<kg::RelationId>> paths;
  for (NodeIndex i : eligible) paths.push_back(tree.relation_path(i));

  // Pairs over identical relation sequences carry no signal for a scorer that
  // only sees relations, so they are skipped along with value ties.
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t a = 0; a < eligible.size(); ++a) {
    for (std::size_t b = a + 1; b < eligible.size(); ++b) {
      if (search_value(tree.node(eligible[a])) == search_value(tree.node(eligible[b]))) continue;
      if (paths[a] == paths[b]) continue;
      pool.emplace_back(a, b);
    }
  }
  const std::size_t take = std::min(pool.size(), config.pairs_per_finetune);
  std::vector<PseudoPair> out;
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    auto [a, b] = pool[i];
    double va = search_value(tree.node(eligible[a]));
    double vb = search_value(tree.node(eligible[b]));
    if (va < vb) {
      std::swap(a, b);
      std::swap(va, vb);
    }
    out.push_back({paths[a], paths[b], tree.node(eligible[a]).entity,
                   tree.node(eligible[b]).entity, va - vb});
  }
  return out;
}

std::vector<Answer> extract_answers(const SearchTree& tree, PathScorer& scorer,
                                    const SearchConfig& config) {
  std::vector<NodeIndex> nodes;
  std::vector<std::vector<kg::RelationId>> paths;
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (n.virtual_root || n.depth < 1 || n.n < 1) continue;
    nodes.push_back(i);
    paths.push_back(tree.relation_path(i));
  }
  const auto scores = scorer.score_all(paths);
  std::unordered_map<kg::EntityId, Answer> best;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const kg::EntityId e = tree.node(nodes[j]).entity;
    auto it = best.find(e);
    if (it == best.end()) {
      best.emplace(e, Answer{e, scores[j], std::move(paths[j])});
    } else if (scores[j] > it->second.score) {
      it->second.score = scores[j];
      it->second.path = std::move(paths[j]);
    }
  }
  std::vector<Answer> out;
  out.reserve(best.size());
  for (auto& [e, a] : best) out.push_back(std::move(a));
  std::sort(out.begin(), out.end(), [](const Answer& a, const Answer& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  if (out.size() > config.top_m) out.resize(config.top_m);
  return out;
}

}  // namespace damr::mcts
