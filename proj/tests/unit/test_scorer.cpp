#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "damr/error.hpp"
#include "damr/scorer.hpp"
#include "fixtures.hpp"

using namespace damr;
using scorer::Mat;

namespace {

struct Model {
  scorer::ScorerDims dims = testkit::small_dims();
  scorer::ScorerParams params = scorer::init_params(dims, 7);
  std::mt19937_64 rng{11};
};

}  // namespace

TEST(Init, SameSeedIsBitIdentical) {
  const auto dims = testkit::small_dims();
  const auto a = scorer::init_params(dims, 3);
  const auto b = scorer::init_params(dims, 3);
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].first, tb[i].first);
    EXPECT_TRUE(*ta[i].second == *tb[i].second) << ta[i].first;
  }
  const auto c = scorer::init_params(dims, 4);
  EXPECT_FALSE(a.w_in == c.w_in);
}

TEST(Init, LayerNormGainsOnesBiasesZero) {
  const auto p = scorer::init_params(testkit::small_dims(), 1);
  for (const auto& l : p.layers) {
    EXPECT_TRUE((l.ln1_g.array() == 1.0).all());
    EXPECT_TRUE((l.ln2_g.array() == 1.0).all());
    EXPECT_TRUE(l.ln1_b.isZero(0.0));
    EXPECT_TRUE(l.bq.isZero(0.0));
    EXPECT_TRUE(l.b1.isZero(0.0));
  }
  EXPECT_TRUE(p.head_b2.isZero(0.0));
}

TEST(Init, WeightsWithinXavierBound) {
  const auto p = scorer::init_params(testkit::small_dims(), 2);
  auto check = [](const Mat& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
    EXPECT_GT(w.cwiseAbs().maxCoeff(), 0.5 * bound);
  };
  check(p.w_in);
  check(p.cross_wv);
  check(p.pool_w1);
  check(p.head_w1);
  for (const auto& l : p.layers) {
    check(l.wq);
    check(l.w1);
    check(l.w2);
  }
}

TEST(Init, RejectsIndivisibleHeads) {
  auto dims = testkit::small_dims();
  dims.heads = 3;
  EXPECT_THROW(scorer::init_params(dims, 0), InputError);
}

TEST(Score, PoolingWeightsNormalize) {
  Model s;
  for (std::size_t len = 1; len <= s.dims.l_max; ++len) {
    const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
    const auto path = testkit::random_path(s.rng, s.dims.d_in, len);
    const auto enc = scorer::encode(s.params, *q, path);
    ASSERT_EQ(enc.alpha.size(), static_cast<Eigen::Index>(len));
    EXPECT_NEAR(enc.alpha.sum(), 1.0, 1e-9);
    EXPECT_GE(enc.alpha.minCoeff(), 0.0);
    EXPECT_TRUE(std::isfinite(enc.score));
    EXPECT_EQ(enc.score, scorer::score(s.params, *q, path));
  }
}

TEST(Score, SingleKeyCrossAttentionAddsValueToEveryRow) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const auto path = testkit::random_path(s.rng, s.dims.d_in, 4);
  const auto enc = scorer::encode(s.params, *q, path);
  Mat c = scorer::project(s.params, *q) * s.params.cross_wv;
  c.row(0) += s.params.cross_bv.row(0);
  Mat expected = enc.e;
  expected.rowwise() += c.row(0);
  EXPECT_TRUE(enc.h == expected);
}

TEST(Score, PooledVectorIsAlphaWeightedSum) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const auto path = testkit::random_path(s.rng, s.dims.d_in, 5);
  const auto enc = scorer::encode(s.params, *q, path);
  const Mat manual = enc.alpha.transpose() * enc.h;
  EXPECT_LT((manual - enc.s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Score, PermutationInvariantWithoutPositionOrPoolingSignal) {
  Model s;
  for (Eigen::Index i = 1; i < s.params.pos.rows(); ++i) s.params.pos.row(i) = s.params.pos.row(0);
  s.params.pool_w2.setZero();
  s.params.pool_b2(0, 0) = 0.3;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const auto path = testkit::random_path(s.rng, s.dims.d_in, 3);
  const std::vector<embed::EmbeddingPtr> reversed{path[2], path[1], path[0]};
  const std::vector<embed::EmbeddingPtr> rotated{path[1], path[2], path[0]};
  const double a = scorer::score(s.params, *q, path);
  EXPECT_NEAR(a, scorer::score(s.params, *q, reversed), 1e-9);
  EXPECT_NEAR(a, scorer::score(s.params, *q, rotated), 1e-9);
}

TEST(Score, OrderMattersWithPositions) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const auto path = testkit::random_path(s.rng, s.dims.d_in, 3);
  const std::vector<embed::EmbeddingPtr> reversed{path[2], path[1], path[0]};
  EXPECT_GT(std::abs(scorer::score(s.params, *q, path) - scorer::score(s.params, *q, reversed)),
            1e-9);
}

TEST(Score, Preconditions) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  EXPECT_THROW(scorer::score(s.params, *q, {}), PreconditionError);
  const auto too_long = testkit::random_path(s.rng, s.dims.d_in, s.dims.l_max + 1);
  EXPECT_THROW(scorer::score(s.params, *q, too_long), PreconditionError);
  const auto wrong = testkit::random_embedding(s.rng, s.dims.d_in + 1);
  EXPECT_THROW(scorer::score(s.params, *wrong, testkit::random_path(s.rng, s.dims.d_in, 2)),
               PreconditionError);
  const std::vector<embed::EmbeddingPtr> bad_hop{wrong};
  EXPECT_THROW(scorer::score(s.params, *q, bad_hop), PreconditionError);
}

TEST(Score, NonFiniteInputIsInputError) {
  Model s;
  auto q = *testkit::random_embedding(s.rng, s.dims.d_in);
  q[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(scorer::score(s.params, q, testkit::random_path(s.rng, s.dims.d_in, 2)), InputError);
  auto hop = *testkit::random_embedding(s.rng, s.dims.d_in);
  hop[0] = std::numeric_limits<double>::infinity();
  const std::vector<embed::EmbeddingPtr> path{std::make_shared<const embed::Embedding>(hop)};
  const auto good_q = testkit::random_embedding(s.rng, s.dims.d_in);
  EXPECT_THROW(scorer::score(s.params, *good_q, path), InputError);
}

TEST(Batch, EmptyBatchIsEmpty) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  EXPECT_TRUE(scorer::score_batch(s.params, *q, {}).empty());
}

TEST(Batch, SingletonEqualsScore) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const std::vector<std::vector<embed::EmbeddingPtr>> batch{testkit::random_path(s.rng, s.dims.d_in, 3)};
  const auto out = scorer::score_batch(s.params, *q, batch);
  ASSERT_EQ(out.size(), 1U);
  EXPECT_NEAR(out[0], scorer::score(s.params, *q, batch[0]), 1e-12);
}

TEST(Batch, LengthsOneAndThreePadded) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const std::vector<std::vector<embed::EmbeddingPtr>> batch{
      testkit::random_path(s.rng, s.dims.d_in, 1), testkit::random_path(s.rng, s.dims.d_in, 3)};
  const auto out = scorer::score_batch(s.params, *q, batch);
  ASSERT_EQ(out.size(), 2U);
  EXPECT_NEAR(out[0], scorer::score(s.params, *q, batch[0]), 1e-9);
  EXPECT_NEAR(out[1], scorer::score(s.params, *q, batch[1]), 1e-9);
}

TEST(Batch, RandomMixedLengthsMatchIndividualScores) {
  Model s;
  std::uniform_int_distribution<std::size_t> size(1, 12);
  std::uniform_int_distribution<std::size_t> len(1, s.dims.l_max);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
    std::vector<std::vector<embed::EmbeddingPtr>> batch(size(s.rng));
    for (auto& p : batch) p = testkit::random_path(s.rng, s.dims.d_in, len(s.rng));
    const auto out = scorer::score_batch(s.params, *q, batch);
    ASSERT_EQ(out.size(), batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      worst = std::max(worst, std::abs(out[i] - scorer::score(s.params, *q, batch[i])));
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Batch, ProjectedScoresMatch) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const auto a = testkit::random_path(s.rng, s.dims.d_in, 2);
  const auto b = testkit::random_path(s.rng, s.dims.d_in, 4);
  std::vector<Mat> proj;
  for (const auto& e : a) proj.push_back(scorer::project(s.params, *e));
  for (const auto& e : b) proj.push_back(scorer::project(s.params, *e));
  const std::vector<std::vector<const Mat*>> paths{{&proj[0], &proj[1]},
                                                   {&proj[2], &proj[3], &proj[4], &proj[5]}};
  const auto out = scorer::score_projected(s.params, scorer::project(s.params, *q), paths);
  ASSERT_EQ(out.size(), 2U);
  EXPECT_NEAR(out[0], scorer::score(s.params, *q, a), 1e-9);
  EXPECT_NEAR(out[1], scorer::score(s.params, *q, b), 1e-9);
}

TEST(Batch, PreconditionsApplyPerPath) {
  Model s;
  const auto q = testkit::random_embedding(s.rng, s.dims.d_in);
  const std::vector<std::vector<embed::EmbeddingPtr>> batch{
      testkit::random_path(s.rng, s.dims.d_in, 2), {}};
  EXPECT_THROW(scorer::score_batch(s.params, *q, batch), PreconditionError);
}

TEST(Params, AxpyAndParameterCount) {
  const auto dims = testkit::small_dims();
  auto a = scorer::zeros_like(dims);
  const auto b = scorer::init_params(dims, 5);
  scorer::axpy(a, 2.0, b);
  EXPECT_TRUE(a.w_in == 2.0 * b.w_in);
  std::size_t n = 0;
  for (const auto& [name, t] : b.tensors()) n += static_cast<std::size_t>(t->size());
  EXPECT_EQ(b.parameter_count(), n);
}
