#include <cmath>
#include <random>

#include "damr/error.hpp"
#include "damr/scorer.hpp"

namespace damr::scorer {

void ScorerDims::validate() const {
  if (d_in < 1 || d < 1 || d_ff < 1 || l_max < 1 || heads < 1) {
    throw InputError("scorer dimensions must be positive");
  }
  if (d % heads != 0) throw InputError("model width must be divisible by the head count");
}

namespace {

template <typename P, typename T>
std::vector<std::pair<std::string, T>> list_tensors(P& p) {
  std::vector<std::pair<std::string, T>> out{{"w_in", &p.w_in}, {"b_in", &p.b_in}, {"pos", &p.pos}};
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    for (auto [name, t] : std::initializer_list<std::pair<const char*, T>>{
             {"ln1_g", &l.ln1_g}, {"ln1_b", &l.ln1_b}, {"wq", &l.wq}, {"bq", &l.bq},
             {"wk", &l.wk},       {"bk", &l.bk},       {"wv", &l.wv}, {"bv", &l.bv},
             {"wo", &l.wo},       {"bo", &l.bo},       {"ln2_g", &l.ln2_g}, {"ln2_b", &l.ln2_b},
             {"w1", &l.w1},       {"b1", &l.b1},       {"w2", &l.w2}, {"b2", &l.b2}}) {
      out.emplace_back(pre + name, t);
    }
  }
  for (auto [name, t] : std::initializer_list<std::pair<const char*, T>>{
           {"cross.wv", &p.cross_wv}, {"cross.bv", &p.cross_bv},
           {"pool.w1", &p.pool_w1},   {"pool.b1", &p.pool_b1},
           {"pool.w2", &p.pool_w2},   {"pool.b2", &p.pool_b2},
           {"head.w1", &p.head_w1},   {"head.b1", &p.head_b1},
           {"head.w2", &p.head_w2},   {"head.b2", &p.head_b2}}) {
    out.emplace_back(name, t);
  }
  return out;
}

// Portable uniform draw in [-bound, bound].
double uniform(std::mt19937_64& rng, double bound) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * bound;
}

void xavier(Mat& w, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform(rng, bound);
  }
}

}  // namespace

std::vector<std::pair<std::string, Mat*>> ScorerParams::tensors() {
  return list_tensors<ScorerParams, Mat*>(*this);
}

std::vector<std::pair<std::string, const Mat*>> ScorerParams::tensors() const {
  return list_tensors<const ScorerParams, const Mat*>(*this);
}

std::size_t ScorerParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

ScorerParams zeros_like(const ScorerDims& dims) {
  dims.validate();
  const auto d_in = static_cast<Eigen::Index>(dims.d_in);
  const auto d = static_cast<Eigen::Index>(dims.d);
  const auto ff = static_cast<Eigen::Index>(dims.d_ff);
  ScorerParams p;
  p.dims = dims;
  p.w_in = Mat::Zero(d_in, d);
  p.b_in = Mat::Zero(1, d);
  p.pos = Mat::Zero(static_cast<Eigen::Index>(dims.l_max), d);
  p.layers.resize(dims.layers);
  for (auto& l : p.layers) {
    l.ln1_g = l.ln1_b = l.ln2_g = l.ln2_b = Mat::Zero(1, d);
    l.wq = l.wk = l.wv = l.wo = Mat::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = Mat::Zero(1, d);
    l.w1 = Mat::Zero(d, ff);
    l.b1 = Mat::Zero(1, ff);
    l.w2 = Mat::Zero(ff, d);
    l.b2 = Mat::Zero(1, d);
  }
  p.cross_wv = Mat::Zero(d, d);
  p.cross_bv = Mat::Zero(1, d);
  p.pool_w1 = Mat::Zero(d, ff);
  p.pool_b1 = Mat::Zero(1, ff);
  p.pool_w2 = Mat::Zero(ff, 1);
  p.pool_b2 = Mat::Zero(1, 1);
  p.head_w1 = Mat::Zero(2 * d, ff);
  p.head_b1 = Mat::Zero(1, ff);
  p.head_w2 = Mat::Zero(ff, 1);
  p.head_b2 = Mat::Zero(1, 1);
  return p;
}

ScorerParams init_params(const ScorerDims& dims, std::uint64_t seed) {
  ScorerParams p = zeros_like(dims);
  std::mt19937_64 rng(seed);
  xavier(p.w_in, rng);
  xavier(p.pos, rng);
  for (auto& l : p.layers) {
    l.ln1_g.setOnes();
    l.ln2_g.setOnes();
    for (Mat* w : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) xavier(*w, rng);
  }
  for (Mat* w : {&p.cross_wv, &p.pool_w1, &p.pool_w2, &p.head_w1, &p.head_w2}) xavier(*w, rng);
  return p;
}

void axpy(ScorerParams& dst, double scale, const ScorerParams& src) {
  auto d = dst.tensors();
  const auto s = src.tensors();
  if (d.size() != s.size()) throw_precondition("axpy: parameter layouts differ");
  for (std::size_t i = 0; i < d.size(); ++i) *d[i].second += scale * *s[i].second;
}

}  // namespace damr::scorer
