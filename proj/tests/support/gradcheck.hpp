#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>

#include "damr/training.hpp"

namespace damr::testkit {

// Mean pairwise ranking loss recomputed from forward scores only.
double mean_loss(const scorer::ScorerParams& params,
                 std::span<const training::TrainTriplet> batch);

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "tensor[index]"
  std::size_t coordinates = 0;
};

// Compares training::backward against central differences with step
// `delta` on `coordinates` parameters drawn uniformly over all tensors.
// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheck check_gradients(const scorer::ScorerParams& params,
                          std::span<const training::TrainTriplet> batch, std::size_t coordinates,
                          double delta, std::mt19937_64& rng);

}  // namespace damr::testkit
