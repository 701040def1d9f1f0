// Copyright 2026 The oodbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "oodbench/io.hpp"
#include "oodbench/numerics.hpp"
#include "oodbench/pack.hpp"
#include "oodbench/scorers.hpp"
#include "oodbench/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace oodbench {
namespace {

using testing::random_head;
using testing::random_pack;

ClassifierHead make_head(std::initializer_list<std::initializer_list<double>> w, std::vector<double> b) {
  ClassifierHead h;
  h.weight.resize(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(w.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : w) {
    Eigen::Index c = 0;
    for (double x : row) h.weight(r, c++) = x;
    ++r;
  }
  h.bias = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
  return h;
}

TEST(Msp, Examples) {
  EXPECT_NEAR(score_msp(std::vector<double>(10, 3.0)), 0.1, 1e-15);
  EXPECT_NEAR(score_msp(std::vector<double>{10, 0, 0}), 1.0 / (1.0 + 2.0 * std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(score_msp(std::vector<double>{10, 0, 0}), 0.9999092, 1e-7);
  EXPECT_EQ(score_msp(std::vector<double>{1, 2, 3}), score_msp(std::vector<double>{8, 9, 10}));
}

TEST(Energy, Examples) {
  EXPECT_NEAR(score_energy(std::vector<double>(7, 0.0)), std::log(7.0), 1e-15);
  EXPECT_NEAR(score_energy(std::vector<double>{1, 2, 3}), 3.40760596, 1e-8);
  EXPECT_NEAR(score_energy(std::vector<double>{1, 2, 3}, 2.0), 2.0 * logsumexp(std::vector<double>{0.5, 1, 1.5}), 1e-14);
}

TEST(Energy, ShiftLaws) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0, 4);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> l(2 + t % 9);
    for (auto& x : l) x = g(rng);
    const double c = g(rng) * 10;
    auto m = l;
    for (auto& x : m) x += c;
    EXPECT_NEAR(score_energy(m), score_energy(l) + c, 1e-10);
    EXPECT_NEAR(score_msp(m), score_msp(l), 1e-10);
  }
}

TEST(React, Examples) {
  const auto eye = make_head({{1, 0}, {0, 1}}, {0, 0});
  EXPECT_NEAR(score_react(std::vector<double>{5, 1}, eye, 2.0), logsumexp(std::vector<double>{2, 1}), 1e-15);
  EXPECT_NEAR(score_react(std::vector<double>{5, 1}, eye, 2.0), 2.31326169, 1e-8);

  const auto h = make_head({{1, 2}, {3, -1}}, {0.5, -0.25});
  EXPECT_NEAR(score_react(std::vector<double>{4, 1}, h, 0.0), logsumexp(std::vector<double>{0.5, -0.25}), 1e-15);
  const auto l = h.apply(std::vector<double>{4, 1});
  EXPECT_NEAR(score_react(std::vector<double>{4, 1}, h, 4.0), score_energy(l), 1e-15);
}

TEST(React, ClipIsLowerOrderStatistic) {
  Matrix z(2, 5);
  z << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  EXPECT_EQ(fit_react_clip(z, 90.0), 9.0);
  EXPECT_EQ(fit_react_clip(z, 100.0), 10.0);
  EXPECT_EQ(fit_react_clip(z, 1.0), 1.0);
  EXPECT_EQ(fit_react_clip(z, 55.0), 6.0);
  EXPECT_THROW(fit_react_clip(z, 0.0), std::invalid_argument);
  EXPECT_THROW(fit_react_clip(Matrix(0, 3), 90.0), std::invalid_argument);
}

TEST(Mahalanobis, Examples) {
  PrecisionModel m;
  m.class_means.resize(2, 2);
  m.class_means << 0, 0, 3, 4;
  m.precision = Matrix::Identity(2, 2);
  EXPECT_EQ(score_mahalanobis(m, std::vector<double>{3, 4}), 0.0);
  EXPECT_NEAR(score_mahalanobis(m, std::vector<double>{1, 1}), -2.0, 1e-15);

  // Hand instance: two classes in D=2 with a fitted non-diagonal precision.
  Matrix z(6, 2);
  z << 0, 0, 2, 1, 1, -1, 5, 5, 7, 6, 6, 4;
  const auto fit = fit_mahalanobis(z, std::vector<std::int32_t>{0, 0, 0, 1, 1, 1}, 2, 0.0);
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 6; ++i) {
    const Eigen::Vector2d c = z.row(i).transpose() - fit.class_means.row(i / 3).transpose();
    sigma += c * c.transpose();
  }
  sigma /= 6.0;
  const Eigen::Vector2d q(3, 2);
  const double d0 = (q - fit.class_means.row(0).transpose()).dot(sigma.inverse() * (q - fit.class_means.row(0).transpose()));
  const double d1 = (q - fit.class_means.row(1).transpose()).dot(sigma.inverse() * (q - fit.class_means.row(1).transpose()));
  EXPECT_NEAR(score_mahalanobis(fit, std::vector<double>{3, 2}), -std::min(d0, d1), 1e-10);
}

TEST(KlMatching, Examples) {
  EXPECT_NEAR(kl_divergence(std::vector<double>{0.9, 0.1}, std::vector<double>{0.5, 0.5}),
              0.9 * std::log(1.8) + 0.1 * std::log(0.2), 1e-15);
  Matrix templates(2, 2);
  templates << 0.5, 0.5, 0.9, 0.1;
  EXPECT_NEAR(score_kl_matching(templates, std::vector<double>{0, 0}), 0.0, 1e-15);
  EXPECT_NEAR(score_kl_matching(templates, std::vector<double>{std::log(9.0), 0}), 0.0, 1e-15);

  Matrix one(1, 2);
  one << 0.5, 0.5;
  EXPECT_NEAR(score_kl_matching(one, std::vector<double>{std::log(9.0), 0}),
              -(0.9 * std::log(1.8) + 0.1 * std::log(0.2)), 1e-15);
  EXPECT_NEAR(score_kl_matching(one, std::vector<double>{std::log(9.0), 0}), -0.3680642, 1e-7);
  // Zero entries in p contribute nothing; zero entries in q are floored.
  EXPECT_NEAR(kl_divergence(std::vector<double>{1, 0}, std::vector<double>{1, 0}), 0.0, 1e-15);
  EXPECT_NEAR(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}), 0.5 * std::log(0.5 / 1e-12) + 0.5 * std::log(0.5), 1e-9);
}

TEST(KlMatching, TemplatesAreClassMeanPosteriors) {
  Matrix logits(4, 2);
  logits << 2, 0, 1, 0, 0, 3, 5, 0;
  // Row 3 is labelled 1 but predicted 0, so it is left out.
  const auto t = fit_kl_matching(logits, std::vector<std::int32_t>{0, 0, 1, 1});
  const auto p0 = softmax(std::vector<double>{2, 0});
  const auto p1 = softmax(std::vector<double>{1, 0});
  EXPECT_NEAR(t(0, 0), 0.5 * (p0[0] + p1[0]), 1e-15);
  EXPECT_NEAR(t(1, 1), softmax(std::vector<double>{0, 3})[1], 1e-15);
  EXPECT_THROW(fit_kl_matching(logits, std::vector<std::int32_t>{0, 0, 0, 0}), std::invalid_argument);
}

TEST(GradNorm, Examples) {
  EXPECT_EQ(score_gradnorm(std::vector<double>{2, 2, 2}, std::vector<double>{1, -5, 3}), 0.0);
  EXPECT_NEAR(score_gradnorm(std::vector<double>{800, 0}, std::vector<double>{1, -1, 1}), 3.0, 1e-12);
}

TEST(GradNorm, ExplicitGradientOracle) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> g(0, 2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> l(3), z(4);
    for (auto& x : l) x = g(rng);
    for (auto& x : z) x = g(rng);
    const double expected = oracle::gradnorm_materialized(l, z);
    EXPECT_NEAR(score_gradnorm(l, z), expected, 1e-10 * std::max(1.0, expected));
  }
}

TEST(Knn, Examples) {
  Matrix train(3, 3);
  train << 1, 0, 0, 0, 2, 0, 1, 1, 0;
  const auto index = fit_knn(train);
  EXPECT_NEAR(score_knn(index, std::vector<double>{0, 7, 0}, 1), 0.0, 1e-15);
  EXPECT_NEAR(score_knn(index, std::vector<double>{0, 0, 4}, 1), -std::sqrt(2.0), 1e-15);
  EXPECT_THROW(score_knn(index, std::vector<double>{0, 0, 0}, 1), std::invalid_argument);
}

TEST(Knn, ScaleInvariantAndMatchesOracle) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  Matrix train(300, 6);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = g(rng);
  const auto index = fit_knn(train);
  for (int q = 0; q < 20; ++q) {
    std::vector<double> z(6);
    for (auto& x : z) x = g(rng);
    auto scaled = z;
    const double a = scale(rng);
    for (auto& x : scaled) x *= a;
    EXPECT_NEAR(score_knn(index, z, 10), score_knn(index, scaled, 10), 1e-12);

    const Eigen::Map<const Eigen::RowVectorXd> zr(z.data(), 6);
    std::vector<double> dist;
    for (Eigen::Index i = 0; i < train.rows(); ++i) dist.push_back((train.row(i).normalized() - zr.normalized()).norm());
    std::sort(dist.begin(), dist.end());
    EXPECT_NEAR(score_knn(index, z, 10), -dist[9], 1e-9);
  }
}

TEST(Vim, BiasZeroGivesZeroOrigin) {
  std::mt19937_64 rng(24);
  auto head = random_head(rng, 3, 5);
  head.bias.setZero();
  auto pack = random_pack(rng, head, 50);
  const auto s = fit_vim(pack.features, pack.logits, head, 2);
  EXPECT_EQ(s.subspace.origin.norm(), 0.0);
}

TEST(Vim, OriginSolvesHeadEquation) {
  std::mt19937_64 rng(25);
  const auto head = random_head(rng, 3, 6);
  const auto pack = random_pack(rng, head, 40);
  const auto s = fit_vim(pack.features, pack.logits, head, 2);
  EXPECT_LT((head.weight * s.subspace.origin + head.bias).norm(), 1e-10);
}

TEST(Vim, SingleAxisExample) {
  Matrix z(4, 2);
  z << 1, 0, 2, 0, -1, 0, 3, 0;
  const auto head = make_head({{1, 0}, {0.5, 0}}, {0, 0});
  Matrix logits(4, 2);
  for (Eigen::Index i = 0; i < 4; ++i) logits.row(i) = (head.weight * z.row(i).transpose()).transpose();
  const auto s = fit_vim(z, logits, head, 1);
  // Training residuals are all zero, so alpha = 0 by the zero-denominator rule.
  EXPECT_EQ(s.alpha, 0.0);
  EXPECT_NEAR(s.subspace.residual_norm(std::vector<double>{0, 1}), 1.0, 1e-12);

  // With an off-axis training row the residual mean is positive.
  Matrix z2(3, 2);
  z2 << 2, 0, 4, 0, 1, 0.3;
  Matrix l2(3, 2);
  for (Eigen::Index i = 0; i < 3; ++i) l2.row(i) = (head.weight * z2.row(i).transpose()).transpose();
  const auto s2 = fit_vim(z2, l2, head, 1);
  double max_logit = 0.0, resid = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    max_logit += l2.row(i).maxCoeff();
    resid += s2.subspace.residual_norm(std::vector<double>(z2.row(i).data(), z2.row(i).data() + 2));
  }
  EXPECT_NEAR(s2.alpha, max_logit / resid, 1e-12);
  const std::vector<double> q{0, 1}, ql{0, 0};
  EXPECT_NEAR(score_vim(s2, q, ql), logsumexp(ql) - s2.alpha * s2.subspace.residual_norm(q), 1e-15);
}

TEST(Dice, Examples) {
  const auto head = make_head({{3, 1}, {1, 3}}, {0, 0});
  Matrix train(2, 2);
  train << 0, 2, 2, 0;  // mean [1, 1]
  DiceState state{fit_dice(train, head, 0.5), head};
  EXPECT_EQ(state.keep_mask, (std::vector<std::uint8_t>{1, 0, 0, 1}));
  EXPECT_NEAR(score_dice(state, std::vector<double>{1, 2}), logsumexp(std::vector<double>{3, 6}), 1e-15);
  EXPECT_NEAR(score_dice(state, std::vector<double>{1, 2}), 6.04858735, 1e-8);

  // Sparsity just below one keeps exactly one unit per class.
  std::mt19937_64 rng(26);
  const auto big = random_head(rng, 4, 9);
  const auto pack = random_pack(rng, big, 30);
  const auto mask = fit_dice(pack.features, big, 0.999);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(std::accumulate(mask.begin() + c * 9, mask.begin() + (c + 1) * 9, 0), 1);
}

TEST(Dice, TiesGoToLowerIndex) {
  const auto head = make_head({{1, 1, 1}, {2, 2, 0}}, {0, 0});
  Matrix train = Matrix::Ones(1, 3);
  const auto mask = fit_dice(train, head, 0.6);  // keep ceil(1.2) = 2
  EXPECT_EQ(mask, (std::vector<std::uint8_t>{1, 1, 0, 1, 1, 0}));
}

TEST(DegenerateEquivalence, ReactDiceVimReduceToEnergy) {
  std::mt19937_64 rng(27);
  for (int t = 0; t < 20; ++t) {
    const auto head = random_head(rng, 2 + t % 6, 3 + t % 7);
    const auto pack = random_pack(rng, head, 60);
    const double big_clip = pack.features.maxCoeff();
    DiceState dice{fit_dice(pack.features, head, 0.0), head};
    const auto vim = fit_vim(pack.features, pack.logits, head, head.feature_dim());
    for (std::size_t i = 0; i < pack.rows(); ++i) {
      const double e = score_energy(pack.logit_row(i));
      EXPECT_NEAR(score_react(pack.feature_row(i), head, big_clip), e, 1e-10);
      EXPECT_NEAR(score_dice(dice, pack.feature_row(i)), e, 1e-10);
      EXPECT_NEAR(score_vim(vim, pack.feature_row(i), pack.logit_row(i)), e, 1e-10);
    }
  }
}

TEST(ScorerConfig, ValidatesRanges) {
  ScorerConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.vim_dim_for(16), 16u);
  EXPECT_EQ(c.vim_dim_for(2048), 256u);
  c.react_percentile = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.dice_sparsity = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.energy_temperature = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.knn_k = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

class FitAllTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synthetic::Spec spec;
    spec.num_classes = 3;
    spec.dim = 8;
    spec.n_train = 600;
    spec.n_validation = 60;
    spec.n_ood = 200;
    bench_ = new synthetic::Benchmark(synthetic::generate(spec));
  }
  static void TearDownTestSuite() { delete bench_; }
  static ScorerConfig config() {
    ScorerConfig c;
    c.knn_k = 10;
    c.vim_dim = 3;
    return c;
  }
  static synthetic::Benchmark* bench_;
};
synthetic::Benchmark* FitAllTest::bench_ = nullptr;

TEST_F(FitAllTest, NineStatesWithConsistentShapes) {
  const auto& b = *bench_;
  const auto train = b.train.select_rows(correctness(b.train).correct_rows());
  const auto fitted = fit_all(train, b.head, config());
  ASSERT_EQ(fitted.size(), 9u);
  for (const auto& [m, s] : fitted) {
    EXPECT_EQ(s.method, m);
    EXPECT_EQ(s.feature_dim, 8u);
    EXPECT_EQ(s.num_classes, 3u);
  }
  const auto& vim = std::get<VimState>(fitted.at(Method::Vim).state);
  EXPECT_GT(vim.alpha, 0.0);
  EXPECT_LT((vim.subspace.basis.transpose() * vim.subspace.basis - Matrix::Identity(3, 3)).norm(), 1e-8);
  const auto& knn = std::get<KnnState>(fitted.at(Method::Knn).state);
  EXPECT_EQ(knn.index.size(), train.rows());
  const auto& maha = std::get<MahalanobisState>(fitted.at(Method::Mahalanobis).state);
  EXPECT_LT((maha.model.precision - maha.model.precision.transpose()).norm(), 1e-8 * maha.model.precision.norm());
}

TEST_F(FitAllTest, OrientationIdAboveFarOod) {
  const auto& b = *bench_;
  const auto train = b.train.select_rows(correctness(b.train).correct_rows());
  const auto fitted = fit_all(train, b.head, config());
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  for (const auto& [m, s] : fitted) {
    std::vector<double> id, ood;
    for (std::size_t i = 0; i < train.rows(); ++i) id.push_back(score_row(s, train.feature_row(i), train.logit_row(i)));
    for (const auto& pack : b.ood) {
      for (std::size_t i = 0; i < pack.rows(); ++i) ood.push_back(score_row(s, pack.feature_row(i), pack.logit_row(i)));
    }
    EXPECT_GT(median(id), median(ood)) << display_name(m);
  }
}

TEST_F(FitAllTest, MissingClassNamesClassConditionalFits) {
  const auto& b = *bench_;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < b.train.rows(); ++i) {
    if (b.train.labels[i] != 2 && correctness(b.train).values[i]) rows.push_back(i);
  }
  const auto train = b.train.select_rows(rows);
  try {
    fit_all(train, b.head, config());
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    EXPECT_EQ(e.failures().size(), 2u);
    EXPECT_TRUE(e.failures().count(Method::Mahalanobis));
    EXPECT_TRUE(e.failures().count(Method::KlMatching));
    EXPECT_NE(std::string(e.what()).find("Mahalanobis"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("KL-Matching"), std::string::npos);
  }
}

TEST_F(FitAllTest, KnnNeedsEnoughRows) {
  const auto& b = *bench_;
  auto c = config();
  c.knn_k = b.train.rows() + 1;
  EXPECT_THROW(fit_scorer(Method::Knn, b.train, b.head, c), std::invalid_argument);
}

TEST_F(FitAllTest, DeterministicSerialisedStates) {
  const auto& b = *bench_;
  const auto train = b.train.select_rows(correctness(b.train).correct_rows());
  const auto one = fit_all(train, b.head, config(), 1);
  const auto two = fit_all(train, b.head, config(), 4);
  for (const auto& [m, s] : one) EXPECT_EQ(io::encode_state(s), io::encode_state(two.at(m))) << display_name(m);
}

TEST_F(FitAllTest, BatchScoringIsPermutationEquivariant) {
  const auto& b = *bench_;
  const auto train = b.train.select_rows(correctness(b.train).correct_rows());
  const auto fitted = fit_all(train, b.head, config());
  std::vector<std::size_t> perm(b.validation.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(28);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto shuffled = b.validation.select_rows(perm);
  for (const auto& [m, s] : fitted) {
    for (std::size_t i = 0; i < perm.size(); ++i) {
      EXPECT_EQ(score_row(s, shuffled.feature_row(i), shuffled.logit_row(i)),
                score_row(s, b.validation.feature_row(perm[i]), b.validation.logit_row(perm[i])));
    }
  }
}

}  // namespace
}  // namespace oodbench
