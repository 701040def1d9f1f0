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

#include <gtest/gtest.h>

#include "oodbench/harness.hpp"
#include "oodbench/metrics.hpp"
#include "oodbench/numerics.hpp"
#include "oodbench/pack.hpp"
#include "oodbench/synthetic.hpp"
#include "support.hpp"

namespace oodbench {
namespace {

class HarnessTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synthetic::Spec spec;
    spec.num_classes = 3;
    spec.dim = 8;
    spec.n_train = 600;
    spec.n_validation = 200;
    spec.n_ood = 150;
    spec.class_separation = 2.5;  // some misclassified rows
    bench_ = new synthetic::Benchmark(synthetic::generate(spec));
  }
  static void TearDownTestSuite() { delete bench_; }

  static EvalInputs inputs() {
    EvalInputs in;
    in.head = bench_->head;
    in.train = bench_->train;
    in.tests.push_back(bench_->validation);
    for (const auto& p : bench_->ood) in.tests.push_back(p);
    return in;
  }
  static EvalConfig config() {
    EvalConfig cfg;
    cfg.scorer.knn_k = 10;
    cfg.scorer.vim_dim = 3;
    return cfg;
  }
  static synthetic::Benchmark* bench_;
};
synthetic::Benchmark* HarnessTest::bench_ = nullptr;

TEST_F(HarnessTest, IdenticalPackGivesRejectedFraction) {
  auto in = inputs();
  const auto restricted = in.train.select_rows(correctness(in.train).correct_rows());
  auto copy = restricted;
  copy.dataset_id = "same";
  copy.kind = DatasetKind::Validation;
  in.tests = {copy};
  const auto cfg = config();
  const auto table = compute_scores(in, cfg, 1);
  const auto report = evaluate_human_centric(table, in, cfg);
  const double n = static_cast<double>(restricted.rows());
  for (auto m : kAllMethods) {
    const auto* row = report.find(m, "same");
    ASSERT_NE(row, nullptr);
    const auto& s = table.scores.at(m).train;
    for (std::size_t f = 0; f < 2; ++f) {
      const double p = f == 0 ? 0.99 : 0.95;
      const auto t = reject_threshold(s, p);
      const auto rejected = std::count_if(s.begin(), s.end(), [&](double x) { return !t.keeps(x); });
      EXPECT_EQ(row->values[f], static_cast<double>(rejected) / n);
      EXPECT_GE(row->values[f], std::floor((1 - p) * n + 1e-9) / n - 1e-15);
      EXPECT_NEAR(row->values[f], 1 - p, 0.01) << display_name(m);
    }
  }
}

TEST_F(HarnessTest, OneRowTrainingSetGivesBelowAll) {
  auto in = inputs();
  const auto correct = correctness(in.train).correct_rows();
  in.train = in.train.select_rows(std::vector<std::size_t>{correct.front()});
  auto cfg = config();
  cfg.methods = {Method::Msp, Method::Energy, Method::GradNorm, Method::React, Method::Dice};
  const auto report = evaluate_human_centric(compute_scores(in, cfg, 1), in, cfg);
  for (auto m : cfg.methods) {
    const auto& th = report.thresholds.at(std::string(to_string(m)));
    for (const auto& [metric, value] : th) EXPECT_FALSE(value.has_value());
    for (const auto& pack : in.tests) {
      const auto y = correctness(pack);
      const double wrong = static_cast<double>(pack.rows() - y.count_correct()) / static_cast<double>(pack.rows());
      const auto* row = report.find(m, pack.dataset_id);
      ASSERT_NE(row, nullptr);
      EXPECT_DOUBLE_EQ(row->values[0], wrong);
      EXPECT_DOUBLE_EQ(row->values[1], wrong);
    }
  }
}

TEST_F(HarnessTest, AverageRowAndThresholdMonotonicity) {
  const auto in = inputs();
  const auto cfg = config();
  const auto table = compute_scores(in, cfg, 2);
  const auto report = evaluate_human_centric(table, in, cfg);
  EXPECT_EQ(report.metric_names, (std::vector<std::string>{"DER99", "DER95"}));
  EXPECT_EQ(report.datasets, (std::vector<std::string>{"validation", "ood-a", "ood-b"}));
  for (auto m : kAllMethods) {
    const auto* avg = report.find(m, kAverageRow);
    ASSERT_NE(avg, nullptr);
    for (std::size_t f = 0; f < 2; ++f) {
      double sum = 0.0;
      for (const auto& d : report.datasets) sum += report.find(m, d)->values[f];
      EXPECT_NEAR(avg->values[f], sum / 3.0, 1e-15);
    }
    const auto& th = report.thresholds.at(std::string(to_string(m)));
    const double g99 = th.at("DER99").value_or(-INFINITY);
    const double g95 = th.at("DER95").value_or(-INFINITY);
    EXPECT_LE(g99, g95);
    const auto& s = table.scores.at(m).train;
    EXPECT_LE(std::count_if(s.begin(), s.end(), [&](double x) { return x <= g99; }),
              std::count_if(s.begin(), s.end(), [&](double x) { return x <= g95; }));
  }
}

TEST_F(HarnessTest, FailedFitDoesNotAbortRun) {
  const auto in = inputs();
  auto cfg = config();
  cfg.scorer.knn_k = 100000;
  const auto report = evaluate_human_centric(compute_scores(in, cfg, 1), in, cfg);
  EXPECT_EQ(report.failures.size(), 1u);
  EXPECT_TRUE(report.failures.count("knn"));
  EXPECT_EQ(report.find(Method::Knn, "validation"), nullptr);
  EXPECT_NE(report.find(Method::Msp, "validation"), nullptr);
}

TEST_F(HarnessTest, ConventionalCorrectOnlyMatchesAllWhenEveryRowIsCorrect) {
  auto in = inputs();
  testing::label_by_prediction(in.tests[0]);
  auto cfg = config();
  cfg.mode = EvalMode::Conventional;
  const auto table = compute_scores(in, cfg, 1);
  cfg.id_definition = IdDefinition::AllValidation;
  const auto all = evaluate_conventional(table, in, cfg);
  cfg.id_definition = IdDefinition::CorrectOnly;
  const auto correct = evaluate_conventional(table, in, cfg);
  ASSERT_EQ(all.rows.size(), correct.rows.size());
  for (std::size_t i = 0; i < all.rows.size(); ++i) EXPECT_EQ(all.rows[i].values, correct.rows[i].values);
  EXPECT_EQ(all.metric_names, (std::vector<std::string>{"FPR95", "AUROC"}));
  EXPECT_EQ(all.datasets, (std::vector<std::string>{"ood-a", "ood-b"}));
}

TEST_F(HarnessTest, ConventionalNeedsValidationAndOod) {
  auto in = inputs();
  auto cfg = config();
  cfg.mode = EvalMode::Conventional;
  cfg.methods = {Method::Msp};
  const auto table = compute_scores(in, cfg, 1);
  auto no_val = in;
  no_val.tests.erase(no_val.tests.begin());
  EXPECT_THROW(evaluate_conventional(table, no_val, cfg), std::invalid_argument);
  auto no_ood = in;
  no_ood.tests.resize(1);
  EXPECT_THROW(evaluate_conventional(table, no_ood, cfg), std::invalid_argument);
}

TEST_F(HarnessTest, ConventionalSeparatedMethodIsPerfect) {
  const auto in = inputs();
  auto cfg = config();
  cfg.methods = {Method::Mahalanobis};
  const auto report = evaluate_conventional(compute_scores(in, cfg, 1), in, cfg);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.values[0], 0.0);
    EXPECT_EQ(row.values[1], 1.0);
  }
}

TEST(Aggregate, Examples) {
  std::vector<ReportRow> one{{Method::Msp, "a", {0.25, 0.5}}};
  auto out = aggregate(one);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].dataset_id, kAverageRow);
  EXPECT_EQ(out[1].values, one[0].values);

  out = aggregate(std::vector<ReportRow>{{Method::Msp, "a", {0.2}}, {Method::Msp, "b", {0.4}}});
  EXPECT_NEAR(out.back().values[0], 0.3, 1e-15);

  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u;
  std::vector<ReportRow> rows;
  double sum = 0.0;
  for (int i = 0; i < 8; ++i) {
    rows.push_back({Method::Energy, "d" + std::to_string(i), {u(rng)}});
    sum += rows.back().values[0];
  }
  EXPECT_NEAR(aggregate(rows).back().values[0], sum / 8.0, 1e-12);
}

TEST(DerMetricName, Formatting) {
  EXPECT_EQ(der_metric_name(0.95), "DER95");
  EXPECT_EQ(der_metric_name(0.99), "DER99");
  EXPECT_EQ(der_metric_name(0.9), "DER90");
}

}  // namespace
}  // namespace oodbench
