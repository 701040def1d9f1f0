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

#include "oodbench/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/QR>
#include <fmt/format.h>
#include <json.hpp>

#include "oodbench/io.hpp"

namespace oodbench::synthetic {

namespace {

constexpr const char* kModelId = "synthetic-linear";
constexpr const char* kCreated = "2026-01-01T00:00:00Z";

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void round_to_f32(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = to_f32(m.data()[i]);
}

FeaturePack make_pack(std::string id, DatasetKind kind, Matrix features, std::vector<std::int32_t> labels,
                      const ClassifierHead& head) {
  FeaturePack pack;
  pack.dataset_id = std::move(id);
  pack.kind = kind;
  pack.model_id = kModelId;
  pack.created_utc = kCreated;
  round_to_f32(features);
  pack.features = std::move(features);
  pack.logits.resize(pack.features.rows(), static_cast<Eigen::Index>(head.num_classes()));
  for (std::size_t i = 0; i < pack.rows(); ++i) {
    const auto l = head.apply(pack.feature_row(i));
    for (std::size_t c = 0; c < l.size(); ++c) {
      pack.logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = to_f32(l[c]);
    }
  }
  pack.labels = std::move(labels);
  return pack;
}

Matrix class_samples(const Spec& spec, NormalSource& rng, std::size_t n, std::vector<std::int32_t>& labels) {
  Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::int32_t>(i % spec.num_classes);
    labels[i] = y;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const double mean = (j / 2 == static_cast<std::size_t>(y)) ? spec.class_separation : 0.0;
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mean + spec.noise * rng.normal();
    }
  }
  return z;
}

}  // namespace

double NormalSource::uniform() {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Benchmark generate(const Spec& spec) {
  if (spec.num_classes < 2 || 2 * spec.num_classes > spec.dim) {
    throw std::invalid_argument("synthetic: need 2 <= num_classes <= dim / 2");
  }
  NormalSource rng(spec.seed);
  Benchmark bench;
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto k = static_cast<Eigen::Index>(spec.num_classes);

  std::vector<std::int32_t> train_labels;
  Matrix train_z = class_samples(spec, rng, spec.n_train, train_labels);
  round_to_f32(train_z);

  // Least-squares head on [z, 1].
  const auto n = train_z.rows();
  Eigen::MatrixXd design(n, d + 1);
  design.leftCols(d) = train_z;
  design.col(d).setOnes();
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) targets(i, train_labels[static_cast<std::size_t>(i)]) = spec.logit_scale;
  const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(targets);  // (D+1) x K

  bench.head.model_id = kModelId;
  bench.head.created_utc = kCreated;
  bench.head.weight = coef.topRows(d).transpose();
  bench.head.bias = coef.row(d).transpose();
  round_to_f32(bench.head.weight);
  for (Eigen::Index c = 0; c < k; ++c) bench.head.bias[c] = to_f32(bench.head.bias[c]);

  bench.train = make_pack("train", DatasetKind::IdTrain, train_z, train_labels, bench.head);

  std::vector<std::int32_t> val_labels;
  Matrix val_z = class_samples(spec, rng, spec.n_validation, val_labels);
  bench.validation = make_pack("validation", DatasetKind::Validation, std::move(val_z), val_labels, bench.head);

  // Pooled within-class standard deviation, averaged over dimensions.
  Matrix means = Matrix::Zero(k, d);
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    means.row(train_labels[static_cast<std::size_t>(i)]) += bench.train.features.row(i);
    counts[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(i)])] += 1.0;
  }
  for (Eigen::Index c = 0; c < k; ++c) means.row(c) /= counts[static_cast<std::size_t>(c)];
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ss += (bench.train.features.row(i) - means.row(train_labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  bench.pooled_sd = std::sqrt(ss / static_cast<double>(n * d));
  const Eigen::RowVectorXd global_mean = bench.train.features.colwise().mean();

  // a: into the free coordinates, which no class mean touches. b: half of
  // that, half back along the all-ones direction of the class coordinates.
  const auto used = static_cast<Eigen::Index>(2 * spec.num_classes);
  Eigen::RowVectorXd toward_origin = Eigen::RowVectorXd::Zero(d);
  toward_origin.head(used).setConstant(-1.0);
  toward_origin.normalize();
  Eigen::RowVectorXd upper = Eigen::RowVectorXd::Zero(d);
  for (Eigen::Index j = used; j < d; ++j) upper[j] = ((j - used) % 2 == 0) ? 1.0 : -1.0;
  upper.normalize();
  for (int variant = 0; variant < 2; ++variant) {
    const Eigen::RowVectorXd direction =
        variant == 0 ? upper : Eigen::RowVectorXd((toward_origin + upper) / std::sqrt(2.0));
    const Eigen::RowVectorXd center = global_mean + spec.ood_shift * bench.pooled_sd * direction;
    Matrix z(static_cast<Eigen::Index>(spec.n_ood), d);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < d; ++j) z(i, j) = center[j] + spec.noise * rng.normal();
    }
    bench.ood.push_back(make_pack(variant == 0 ? "ood-a" : "ood-b", DatasetKind::LabelShift, std::move(z),
                                  std::vector<std::int32_t>(spec.n_ood, kNoLabel), bench.head));
  }
  return bench;
}

void write_fixture(const Benchmark& bench, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_head(bench.head, dir / "head.oodh");
  io::write_pack(bench.train, dir / "train.oodp");
  io::write_pack(bench.validation, dir / "validation.oodp");
  nlohmann::json tests = nlohmann::json::array();
  tests.push_back({{"path", "validation.oodp"}, {"kind", "validation"}});
  for (const auto& pack : bench.ood) {
    const auto name = pack.dataset_id + ".oodp";
    io::write_pack(pack, dir / name);
    tests.push_back({{"path", name}, {"kind", "label_shift"}});
  }
  const nlohmann::json config = {
      {"head_path", "head.oodh"},
      {"train_path", "train.oodp"},
      {"tests", tests},
      {"keep_fractions", {0.95, 0.99}},
      {"mode", "human_centric"},
      {"scorer", {{"knn_k", 50}, {"vim_dim", 6}}},
  };
  io::write_file_atomic(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace oodbench::synthetic
