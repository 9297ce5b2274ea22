#include <cmath>

#include "damr/error.hpp"
#include "damr/training.hpp"

namespace damr::training {

AdamState AdamState::fresh(const scorer::ScorerDims& dims) {
  AdamState s;
  s.m = scorer::zeros_like(dims);
  s.v = scorer::zeros_like(dims);
  return s;
}

void adam_step(ScorerParams& params, const ScorerParams& grads, AdamState& state, double lr) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw_precondition("adam_step: parameter, gradient and state layouts differ");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& pt = *p[i].second;
    const auto& gt = *g[i].second;
    auto& mt = *m[i].second;
    auto& vt = *v[i].second;
    if (pt.rows() != gt.rows() || pt.cols() != gt.cols()) {
      throw_precondition("adam_step: shape mismatch in " + p[i].first);
    }
    mt = state.beta1 * mt + (1.0 - state.beta1) * gt;
    vt = state.beta2 * vt + (1.0 - state.beta2) * gt.cwiseAbs2();
    pt.array() -= lr * (mt.array() / bc1) / ((vt.array() / bc2).sqrt() + state.eps);
  }
}

}  // namespace damr::training
