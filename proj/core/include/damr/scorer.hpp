#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "damr/embed.hpp"

namespace damr::scorer {

// Every tensor is a dense matrix; vectors are stored as 1 x n rows. Linear maps
// use the row-vector convention y = x W + b with W stored (in x out).
using Mat = Eigen::MatrixXd;

struct ScorerDims {
  std::size_t d_in = 1024;
  std::size_t d = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_ff = 512;
  std::size_t l_max = 8;

  void validate() const;  // throws InputError
  friend bool operator==(const ScorerDims&, const ScorerDims&) = default;
};

struct LayerParams {
  Mat ln1_g, ln1_b;
  Mat wq, bq, wk, bk, wv, bv, wo, bo;
  Mat ln2_g, ln2_b;
  Mat w1, b1, w2, b2;
};

struct ScorerParams {
  ScorerDims dims;
  Mat w_in, b_in;  // shared question / relation projection
  Mat pos;         // l_max x d
  std::vector<LayerParams> layers;
  Mat cross_wv, cross_bv;
  Mat pool_w1, pool_b1, pool_w2, pool_b2;
  Mat head_w1, head_b1, head_w2, head_b2;

  // Stable (name, tensor) listing; the order defines checkpoint layout.
  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;
  std::size_t parameter_count() const;
};

// All tensors of the right shapes, filled with zeros.
ScorerParams zeros_like(const ScorerDims& dims);
// Xavier-uniform weights, unit layer-norm gains, zero biases.
ScorerParams init_params(const ScorerDims& dims, std::uint64_t seed);

// Adds `scale * src` into `dst` tensor-by-tensor.
void axpy(ScorerParams& dst, double scale, const ScorerParams& src);

struct PathEncoding {
  Mat e;                   // l x d transformer output
  Mat h;                   // l x d after question injection
  Eigen::VectorXd alpha;   // l pooling weights
  Mat s;                   // 1 x d pooled path vector
  double score = 0.0;
};

// Projects one embedding through W_in: 1 x d.
Mat project(const ScorerParams& params, std::span<const double> embedding);

PathEncoding encode(const ScorerParams& params, std::span<const double> question,
                    std::span<const embed::EmbeddingPtr> path);
double score(const ScorerParams& params, std::span<const double> question,
             std::span<const embed::EmbeddingPtr> path);

// Scores paths given already-projected inputs (1 x d each). The paths are
// stacked without padding and evaluated in one pass. Used by search, which
// caches projections.
std::vector<double> score_projected(const ScorerParams& params, const Mat& question,
                                    std::span<const std::vector<const Mat*>> paths);

// One pass over the batch, every path zero-padded to the longest member and
// masked out of attention and pooling.
std::vector<double> score_batch(const ScorerParams& params, std::span<const double> question,
                                std::span<const std::vector<embed::EmbeddingPtr>> paths);

}  // namespace damr::scorer
