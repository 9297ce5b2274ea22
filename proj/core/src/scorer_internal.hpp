#pragma once

#include <vector>

#include "damr/scorer.hpp"

namespace damr::scorer::detail {

using Vec = Eigen::VectorXd;

inline constexpr double kLayerNormEps = 1e-5;

// One path inside a stacked batch: rows [offset, offset + rows), of which the
// first `valid` are real hops and the rest are padding.
struct Segment {
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index valid = 0;
};

struct LayerCache {
  Mat x_in, xhat1, a, q, k, v, o, x1, xhat2, b, f1, g;
  Vec rstd1, rstd2;
  std::vector<Mat> probs;  // [segment * heads + head], rows x rows
};

// Everything the backward pass needs from one batched forward evaluation.
struct Forward {
  std::vector<Segment> segs;
  Mat qh;  // segments x d, projected question per path
  Mat x0;  // total rows x d
  std::vector<LayerCache> layers;
  Mat e, c, h, zp, gp;
  Vec logits, alpha;  // per row; alpha is zero on padding
  Mat s, u, hz, hg;   // one row per segment
  Vec scores;
};

double gelu(double x);
double gelu_grad(double x);

// Rows of `x0` hold projected relations plus positions; padding rows must be
// zero. `qh` has one row per segment.
void forward(const ScorerParams& p, Mat qh, Mat x0, std::vector<Segment> segs, Forward& out);

struct InputGrads {
  Mat dqh;  // segments x d
  Mat dx0;  // total rows x d
};

// Accumulates sum_b dscores(b) * dS_b/dtheta into `grads` for every tensor
// except the input projection, whose gradient flows out via the input
// gradients. Requires an unpadded forward.
InputGrads backward(const ScorerParams& p, const Forward& f, const Vec& dscores,
                    ScorerParams& grads);

// Stacks paths of projected rows; each segment is `stride(path)` rows tall.
// Positions restart at zero for every segment.
Mat assemble(const ScorerParams& p, std::span<const std::vector<const Mat*>> paths,
             std::vector<Segment>& segs, bool pad_to_longest);

void require_finite(const Mat& m, const char* name);

}  // namespace damr::scorer::detail
