#include "damr/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "damr/error.hpp"
#include "scorer_internal.hpp"

namespace damr::training {

namespace {

using scorer::Mat;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// sigmoid(-x) without overflow.
double sigmoid_neg(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// Raw embedding rows of `v`, each checked against d_in.
void copy_rows(const ScorerParams& p, std::span<const embed::EmbeddingPtr> v, Mat& out,
               Eigen::Index at) {
  for (const auto& e : v) {
    if (!e || e->size() != p.dims.d_in) {
      throw_precondition("training embedding has the wrong dimension");
    }
    out.row(at++) = Eigen::Map<const Eigen::RowVectorXd>(e->data(), static_cast<Eigen::Index>(e->size()));
  }
}

void check_length(const ScorerParams& p, std::size_t n) {
  if (n == 0) throw_precondition("training path must have at least one relation");
  if (n > p.dims.l_max) throw_precondition("training path longer than l_max");
}

}  // namespace

double bpr_loss(double s_pos, double s_neg) { return softplus(-(s_pos - s_neg)); }

BackwardResult backward(const ScorerParams& params, std::span<const TrainTriplet> batch) {
  if (batch.empty()) throw_precondition("backward needs a non-empty batch");
  using scorer::detail::Segment;
  const auto d_in = static_cast<Eigen::Index>(params.dims.d_in);

  // Each distinct (question, path) is evaluated once; its score gradient is
  // the sum over every triplet side that uses it. Pseudo pairs from one
  // search tree share most of their paths.
  using Key = std::vector<const embed::Embedding*>;
  std::map<Key, Eigen::Index> index;
  std::vector<Segment> segs;
  std::vector<const TrainTriplet*> owner;
  std::vector<const std::vector<embed::EmbeddingPtr>*> members;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> sides;  // (positive, negative) per triplet
  Eigen::Index total = 0;
  auto segment_of = [&](const TrainTriplet& t, const std::vector<embed::EmbeddingPtr>& path) {
    check_length(params, path.size());
    Key key{t.question.get()};
    for (const auto& e : path) key.push_back(e.get());
    const auto [it, fresh] = index.try_emplace(std::move(key), static_cast<Eigen::Index>(segs.size()));
    if (fresh) {
      const auto n = static_cast<Eigen::Index>(path.size());
      segs.push_back({total, n, n});
      owner.push_back(&t);
      members.push_back(&path);
      total += n;
    }
    return it->second;
  };
  for (const auto& t : batch) sides.emplace_back(segment_of(t, t.positive), segment_of(t, t.negative));

  const auto nseg = static_cast<Eigen::Index>(segs.size());
  Mat raw(total, d_in);
  Mat questions(nseg, d_in);
  for (Eigen::Index si = 0; si < nseg; ++si) {
    const auto i = static_cast<std::size_t>(si);
    copy_rows(params, std::span(&owner[i]->question, 1), questions, si);
    copy_rows(params, *members[i], raw, segs[i].offset);
  }

  Mat x0 = raw * params.w_in;
  x0.rowwise() += params.b_in.row(0);
  for (const auto& sg : segs) x0.middleRows(sg.offset, sg.rows) += params.pos.topRows(sg.rows);
  Mat qh = questions * params.w_in;
  qh.rowwise() += params.b_in.row(0);

  scorer::detail::Forward f;
  scorer::detail::forward(params, std::move(qh), std::move(x0), std::move(segs), f);

  BackwardResult out{scorer::zeros_like(params.dims), 0.0};
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  scorer::detail::Vec dscores = scorer::detail::Vec::Zero(nseg);
  for (const auto& [pos, neg] : sides) {
    const double delta = f.scores(pos) - f.scores(neg);
    out.loss += softplus(-delta) * inv_m;
    const double g = -sigmoid_neg(delta) * inv_m;  // dL/d(delta)
    dscores(pos) += g;
    dscores(neg) -= g;
  }

  const auto in = scorer::detail::backward(params, f, dscores, out.grads);
  out.grads.w_in.noalias() += raw.transpose() * in.dx0;
  out.grads.w_in.noalias() += questions.transpose() * in.dqh;
  out.grads.b_in += in.dx0.colwise().sum() + in.dqh.colwise().sum();

  if (!std::isfinite(out.loss)) throw NumericError("non-finite values in ranking loss");
  for (const auto& [name, t] : out.grads.tensors()) {
    if (!t->allFinite()) throw NumericError("non-finite gradient in " + name);
  }
  return out;
}

namespace {

std::vector<kg::RelationId> relation_sequence(const kg::EntityPath& p) { return p.relations(); }

std::vector<embed::EmbeddingPtr> embed_relations(const kg::KnowledgeGraph& kg,
                                                 const embed::Embedder& embedder,
                                                 const kg::EntityPath& p) {
  std::vector<embed::EmbeddingPtr> out;
  for (const auto& hop : p.hops) out.push_back(embedder(kg.relation_label(hop.relation)));
  return out;
}

bool touches(const kg::EntityPath& p, const std::unordered_set<kg::EntityId>& set) {
  return std::any_of(p.hops.begin(), p.hops.end(),
                     [&](const kg::Hop& h) { return set.contains(h.entity); });
}

bool visits(const kg::EntityPath& p, std::size_t upto, kg::EntityId e) {
  if (p.start == e) return true;
  for (std::size_t i = 0; i < upto; ++i) {
    if (p.hops[i].entity == e) return true;
  }
  return false;
}

}  // namespace

std::vector<TrainTriplet> mine_triplets(const kg::KnowledgeGraph& kg, const MiningQuery& query,
                                        const embed::Embedder& embedder,
                                        const MiningConfig& config) {
  if (config.max_len < 1) throw_precondition("mining needs max_len >= 1");
  for (auto t : query.topics) {
    if (!kg.valid(t)) throw LookupError("mining topic id out of range");
  }
  const std::unordered_set<kg::EntityId> answers(query.answers.begin(), query.answers.end());

  std::vector<kg::EntityPath> positives;
  for (auto topic : query.topics) {
    auto found = kg::enumerate_paths(kg, topic, query.answers, config.max_len, config.positive_cap);
    positives.insert(positives.end(), found.begin(), found.end());
  }
  if (positives.empty()) {
    spdlog::debug("no positive path within {} hops for question '{}'", config.max_len,
                  query.question);
    return {};
  }
  std::set<std::vector<kg::RelationId>> positive_seqs;
  for (const auto& p : positives) positive_seqs.insert(relation_sequence(p));

  std::mt19937_64 rng(config.seed);
  const auto zq = embedder(query.question);
  const std::size_t want = config.hard_per_positive + config.random_per_positive;
  std::vector<TrainTriplet> out;

  for (const auto& pos : positives) {
    // Hard negatives: follow the positive for >= 1 hop, then deviate onto a
    // non-answer entity. Stopping short of the answer is the fallback.
    std::vector<kg::EntityPath> hard;
    std::set<std::vector<kg::RelationId>> seen;
    auto offer = [&](kg::EntityPath cand) {
      auto seq = relation_sequence(cand);
      if (positive_seqs.contains(seq) || !seen.insert(std::move(seq)).second) return;
      hard.push_back(std::move(cand));
    };
    for (std::size_t i = 1; i < pos.hops.size(); ++i) {
      const kg::EntityId at = pos.hops[i - 1].entity;
      for (const auto& edge : kg.neighbors(at)) {
        if (edge.relation == pos.hops[i].relation && edge.target == pos.hops[i].entity) continue;
        if (answers.contains(edge.target) || visits(pos, i, edge.target)) continue;
        kg::EntityPath cand{pos.start, {pos.hops.begin(), pos.hops.begin() + i}};
        cand.hops.push_back({edge.relation, edge.target});
        offer(std::move(cand));
      }
    }
    if (hard.empty()) {
      for (std::size_t i = 1; i < pos.hops.size(); ++i) {
        if (answers.contains(pos.hops[i - 1].entity)) continue;
        offer(kg::EntityPath{pos.start, {pos.hops.begin(), pos.hops.begin() + i}});
      }
    }
    std::shuffle(hard.begin(), hard.end(), rng);

    // Random negatives: walks from the same topic that never touch an answer.
    std::vector<kg::EntityPath> random;
    std::uniform_int_distribution<std::size_t> length(1, config.max_len);
    for (std::size_t attempt = 0; attempt < 20 * want && random.size() < want; ++attempt) {
      auto walk = kg::random_walk(kg, pos.start, length(rng), rng);
      if (walk.hops.empty() || touches(walk, answers)) continue;
      if (positive_seqs.contains(relation_sequence(walk))) continue;
      random.push_back(std::move(walk));
    }

    std::size_t n_hard = std::min(config.hard_per_positive, hard.size());
    std::size_t n_random = std::min(config.random_per_positive, random.size());
    if (n_hard < config.hard_per_positive) n_random = std::min(want - n_hard, random.size());
    if (n_random < config.random_per_positive) n_hard = std::min(want - n_random, hard.size());

    const auto zpos = embed_relations(kg, embedder, pos);
    auto emit = [&](const kg::EntityPath& neg) {
      out.push_back({zq, zpos, embed_relations(kg, embedder, neg)});
    };
    for (std::size_t i = 0; i < n_hard; ++i) emit(hard[i]);
    for (std::size_t i = 0; i < n_random; ++i) emit(random[i]);
  }
  return out;
}

TrainResult pretrain(ScorerParams& params, std::span<const TrainTriplet> triplets,
                     const TrainConfig& config) {
  if (triplets.empty()) throw_precondition("pretrain needs at least one triplet");
  if (config.batch_size < 1) throw InputError("batch size must be >= 1");
  TrainResult result;
  AdamState state = AdamState::fresh(params.dims);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainTriplet> batch;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(triplets[order[i]]);
      BackwardResult step;
      try {
        step = backward(params, batch);
      } catch (const NumericError& e) {
        throw TrainingError("training diverged in epoch " + std::to_string(epoch + 1) + ": " +
                            e.what());
      }
      total += step.loss * static_cast<double>(batch.size());
      adam_step(params, step.grads, state, config.lr);
    }
    const double mean = total / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw TrainingError("training loss became non-finite");
    result.epoch_loss.push_back(mean);
    spdlog::debug("epoch {}/{} loss {:.6f}", epoch + 1, config.epochs, mean);
  }
  return result;
}

double finetune_step(ScorerParams& params, std::span<const TrainTriplet> pairs, AdamState& state,
                     double lr) {
  auto step = backward(params, pairs);
  adam_step(params, step.grads, state, lr);
  return step.loss;
}

double ranking_accuracy(const ScorerParams& params, std::span<const TrainTriplet> triplets) {
  if (triplets.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& t : triplets) {
    if (scorer::score(params, *t.question, t.positive) > scorer::score(params, *t.question, t.negative)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

}  // namespace damr::training
