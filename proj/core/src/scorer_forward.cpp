#include <algorithm>
#include <cmath>
#include <numbers>

#include "damr/error.hpp"
#include "scorer_internal.hpp"

namespace damr::scorer {

namespace detail {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

void require_finite(const Mat& m, const char* name) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + name);
}

namespace {

void layer_norm(const Mat& x, const Mat& g, const Mat& b, Mat& xhat, Vec& rstd, Mat& y) {
  xhat.resize(x.rows(), x.cols());
  rstd.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    xhat.row(i) = x.row(i).array() - mu;
    const double var = xhat.row(i).squaredNorm() / static_cast<double>(x.cols());
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) *= rstd(i);
  }
  y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
}

Mat affine(const Mat& x, const Mat& w, const Mat& b) {
  Mat y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

Mat apply_gelu(const Mat& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

void self_attention(const LayerParams& l, std::size_t heads, const std::vector<Segment>& segs,
                    LayerCache& c) {
  const Eigen::Index d = c.a.cols();
  const Eigen::Index dk = d / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  c.q = affine(c.a, l.wq, l.bq);
  c.k = affine(c.a, l.wk, l.bk);
  c.v = affine(c.a, l.wv, l.bv);
  c.o.resize(c.a.rows(), d);
  c.probs.resize(segs.size() * heads);
  for (std::size_t si = 0; si < segs.size(); ++si) {
    const Segment& sg = segs[si];
    for (std::size_t h = 0; h < heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dk;
      Mat& pr = c.probs[si * heads + h];
      pr = Mat::Zero(sg.rows, sg.rows);
      pr.leftCols(sg.valid) = c.q.block(sg.offset, off, sg.rows, dk) *
                              c.k.block(sg.offset, off, sg.valid, dk).transpose();
      pr.leftCols(sg.valid) *= scale;
      for (Eigen::Index i = 0; i < sg.rows; ++i) {
        auto row = pr.row(i).head(sg.valid);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      c.o.block(sg.offset, off, sg.rows, dk) = pr * c.v.block(sg.offset, off, sg.rows, dk);
    }
  }
}

}  // namespace

void forward(const ScorerParams& p, Mat qh, Mat x0, std::vector<Segment> segs, Forward& f) {
  f.segs = std::move(segs);
  f.qh = std::move(qh);
  f.x0 = std::move(x0);
  require_finite(f.x0, "input projection");
  f.layers.resize(p.layers.size());

  Mat x = f.x0;
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const LayerParams& l = p.layers[li];
    LayerCache& c = f.layers[li];
    c.x_in = std::move(x);
    layer_norm(c.x_in, l.ln1_g, l.ln1_b, c.xhat1, c.rstd1, c.a);
    self_attention(l, p.dims.heads, f.segs, c);
    c.x1 = c.x_in + affine(c.o, l.wo, l.bo);
    require_finite(c.x1, "self-attention output");
    layer_norm(c.x1, l.ln2_g, l.ln2_b, c.xhat2, c.rstd2, c.b);
    c.f1 = affine(c.b, l.w1, l.b1);
    c.g = apply_gelu(c.f1);
    x = c.x1 + affine(c.g, l.w2, l.b2);
    require_finite(x, "feed-forward output");
  }
  f.e = std::move(x);

  f.c = affine(f.qh, p.cross_wv, p.cross_bv);
  f.h = f.e;
  for (std::size_t si = 0; si < f.segs.size(); ++si) {
    const Segment& sg = f.segs[si];
    f.h.middleRows(sg.offset, sg.rows).rowwise() += f.c.row(static_cast<Eigen::Index>(si));
  }
  require_finite(f.h, "cross-attention output");

  f.zp = affine(f.h, p.pool_w1, p.pool_b1);
  f.gp = apply_gelu(f.zp);
  f.logits = (f.gp * p.pool_w2).col(0).array() + p.pool_b2(0, 0);
  f.alpha = Vec::Zero(f.logits.size());
  f.s.resize(static_cast<Eigen::Index>(f.segs.size()), f.h.cols());
  for (std::size_t si = 0; si < f.segs.size(); ++si) {
    const Segment& sg = f.segs[si];
    const auto lg = f.logits.segment(sg.offset, sg.valid);
    auto al = f.alpha.segment(sg.offset, sg.valid);
    al = (lg.array() - lg.maxCoeff()).exp();
    al /= al.sum();
    f.s.row(static_cast<Eigen::Index>(si)) = al.transpose() * f.h.middleRows(sg.offset, sg.valid);
  }
  require_finite(f.s, "pooled path vector");

  f.u.resize(f.s.rows(), 2 * f.s.cols());
  f.u << f.s, f.qh;
  f.hz = affine(f.u, p.head_w1, p.head_b1);
  f.hg = apply_gelu(f.hz);
  f.scores = (f.hg * p.head_w2).col(0).array() + p.head_b2(0, 0);
  if (!f.scores.allFinite()) throw NumericError("non-finite values in head score");
}

Mat assemble(const ScorerParams& p, std::span<const std::vector<const Mat*>> paths,
             std::vector<Segment>& segs, bool pad_to_longest) {
  std::size_t longest = 0;
  std::size_t total = 0;
  for (const auto& path : paths) {
    longest = std::max(longest, path.size());
    total += path.size();
  }
  if (pad_to_longest) total = longest * paths.size();
  Mat x0 = Mat::Zero(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(p.dims.d));
  segs.clear();
  Eigen::Index at = 0;
  for (const auto& path : paths) {
    const auto valid = static_cast<Eigen::Index>(path.size());
    const auto rows = pad_to_longest ? static_cast<Eigen::Index>(longest) : valid;
    segs.push_back({at, rows, valid});
    for (Eigen::Index i = 0; i < valid; ++i) {
      x0.row(at + i) = path[static_cast<std::size_t>(i)]->row(0) + p.pos.row(i);
    }
    at += rows;
  }
  return x0;
}

}  // namespace detail

namespace {

void check_embedding(const ScorerParams& p, std::span<const double> v, const char* what) {
  if (v.size() != p.dims.d_in) {
    throw_precondition(std::string(what) + " has dimension " + std::to_string(v.size()) +
                       ", scorer expects " + std::to_string(p.dims.d_in));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw InputError(std::string(what) + " contains non-finite values");
  }
}

void check_path(const ScorerParams& p, std::span<const embed::EmbeddingPtr> path) {
  if (path.empty()) throw_precondition("cannot score an empty path");
  if (path.size() > p.dims.l_max) {
    throw_precondition("path length " + std::to_string(path.size()) + " exceeds l_max " +
                       std::to_string(p.dims.l_max));
  }
  for (const auto& r : path) {
    if (!r) throw_precondition("null relation embedding");
    check_embedding(p, *r, "relation embedding");
  }
}

std::vector<Mat> project_all(const ScorerParams& p, std::span<const embed::EmbeddingPtr> path) {
  std::vector<Mat> out;
  out.reserve(path.size());
  for (const auto& r : path) out.push_back(project(p, *r));
  return out;
}

std::vector<const Mat*> pointers(const std::vector<Mat>& v) {
  std::vector<const Mat*> out;
  for (const auto& m : v) out.push_back(&m);
  return out;
}

}  // namespace

Mat project(const ScorerParams& p, std::span<const double> embedding) {
  const Eigen::Map<const Eigen::RowVectorXd> x(embedding.data(),
                                               static_cast<Eigen::Index>(embedding.size()));
  return x * p.w_in + p.b_in;
}

PathEncoding encode(const ScorerParams& p, std::span<const double> question,
                    std::span<const embed::EmbeddingPtr> path) {
  check_embedding(p, question, "question embedding");
  check_path(p, path);
  const auto projected = project_all(p, path);
  const std::vector<std::vector<const Mat*>> paths{pointers(projected)};
  std::vector<detail::Segment> segs;
  Mat x0 = detail::assemble(p, paths, segs, false);
  detail::Forward f;
  detail::forward(p, project(p, question), std::move(x0), std::move(segs), f);
  return {f.e, f.h, f.alpha, f.s, f.scores(0)};
}

double score(const ScorerParams& p, std::span<const double> question,
             std::span<const embed::EmbeddingPtr> path) {
  return encode(p, question, path).score;
}

std::vector<double> score_projected(const ScorerParams& p, const Mat& question,
                                    std::span<const std::vector<const Mat*>> paths) {
  std::vector<double> out;
  if (paths.empty()) return out;
  for (const auto& path : paths) {
    if (path.empty() || path.size() > p.dims.l_max) {
      throw_precondition("projected path length out of range");
    }
  }
  std::vector<detail::Segment> segs;
  Mat x0 = detail::assemble(p, paths, segs, false);
  Mat qh = question.replicate(static_cast<Eigen::Index>(paths.size()), 1);
  detail::Forward f;
  detail::forward(p, std::move(qh), std::move(x0), std::move(segs), f);
  out.assign(f.scores.data(), f.scores.data() + f.scores.size());
  return out;
}

std::vector<double> score_batch(const ScorerParams& p, std::span<const double> question,
                                std::span<const std::vector<embed::EmbeddingPtr>> paths) {
  std::vector<double> out;
  if (paths.empty()) return out;
  check_embedding(p, question, "question embedding");
  std::vector<std::vector<Mat>> projected;
  std::vector<std::vector<const Mat*>> ptrs;
  projected.reserve(paths.size());
  for (const auto& path : paths) {
    check_path(p, path);
    projected.push_back(project_all(p, path));
    ptrs.push_back(pointers(projected.back()));
  }
  std::vector<detail::Segment> segs;
  Mat x0 = detail::assemble(p, ptrs, segs, true);
  Mat qh = project(p, question).replicate(static_cast<Eigen::Index>(paths.size()), 1);
  detail::Forward f;
  detail::forward(p, std::move(qh), std::move(x0), std::move(segs), f);
  out.assign(f.scores.data(), f.scores.data() + f.scores.size());
  return out;
}

}  // namespace damr::scorer
