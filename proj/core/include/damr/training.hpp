#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "damr/embed.hpp"
#include "damr/kg.hpp"
#include "damr/scorer.hpp"

namespace damr::training {

using scorer::ScorerParams;

struct TrainTriplet {
  embed::EmbeddingPtr question;
  std::vector<embed::EmbeddingPtr> positive;
  std::vector<embed::EmbeddingPtr> negative;
};

// -log(sigmoid(s_pos - s_neg)), evaluated without overflow.
double bpr_loss(double s_pos, double s_neg);

struct BackwardResult {
  ScorerParams grads;
  double loss = 0.0;  // mean over the batch
};

// Analytic gradient of the mean pairwise ranking loss.
BackwardResult backward(const ScorerParams& params, std::span<const TrainTriplet> batch);

struct AdamState {
  ScorerParams m;
  ScorerParams v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const scorer::ScorerDims& dims);
};

void adam_step(ScorerParams& params, const ScorerParams& grads, AdamState& state, double lr);

struct MiningQuery {
  std::string question;
  std::vector<kg::EntityId> topics;
  std::vector<kg::EntityId> answers;
};

struct MiningConfig {
  std::size_t max_len = 4;
  std::size_t positive_cap = 16;  // per topic
  std::size_t hard_per_positive = 1;
  std::size_t random_per_positive = 1;
  std::uint64_t seed = 0;
};

std::vector<TrainTriplet> mine_triplets(const kg::KnowledgeGraph& kg, const MiningQuery& query,
                                        const embed::Embedder& embedder,
                                        const MiningConfig& config);

struct TrainConfig {
  std::size_t epochs = 15;
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;
};

TrainResult pretrain(ScorerParams& params, std::span<const TrainTriplet> triplets,
                     const TrainConfig& config);

// One backward + Adam step over all pairs. Returns the pre-step loss.
double finetune_step(ScorerParams& params, std::span<const TrainTriplet> pairs, AdamState& state,
                     double lr = 1e-5);

// Fraction of triplets with S(p+) > S(p-).
double ranking_accuracy(const ScorerParams& params, std::span<const TrainTriplet> triplets);

}  // namespace damr::training
