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

#include "oodbench/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace oodbench {

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (auto& x : out) x /= sum;
  return out;
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

std::size_t reject_count(std::size_t n, double keep_fraction) {
  // The epsilon absorbs representation error, e.g. (1 - 0.9) * 10 = 0.9999999999999998.
  const double raw = (1.0 - keep_fraction) * static_cast<double>(n);
  return static_cast<std::size_t>(std::floor(raw + 1e-9));
}

Threshold reject_threshold(std::span<const double> scores, double keep_fraction) {
  if (scores.empty()) throw std::invalid_argument("reject_threshold: empty score set");
  if (!(keep_fraction > 0.0 && keep_fraction < 1.0)) {
    throw std::invalid_argument(fmt::format("reject_threshold: keep fraction {} outside (0, 1)", keep_fraction));
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("reject_threshold: non-finite score");
  }
  const std::size_t k = reject_count(scores.size(), keep_fraction);
  if (k == 0) return Threshold(std::nullopt, keep_fraction);
  std::vector<double> work(scores.begin(), scores.end());
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k - 1), work.end());
  return Threshold(work[k - 1], keep_fraction);
}

double PrecisionModel::squared_distance(std::span<const double> z, std::size_t k) const {
  const auto d = static_cast<Eigen::Index>(dim());
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), d);
  const Eigen::VectorXd diff = zv - class_means.row(static_cast<Eigen::Index>(k)).transpose();
  return diff.dot(precision * diff);
}

PrecisionModel fit_precision(const Matrix& features, std::span<const std::int32_t> labels,
                             std::size_t num_classes, double lambda_rel) {
  const auto n = features.rows();
  const auto d = features.cols();
  if (d < 1) throw std::invalid_argument("fit_precision: feature dimension must be >= 1");
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw std::invalid_argument("fit_precision: feature rows and labels differ in length");
  }
  if (!features.allFinite()) throw std::invalid_argument("fit_precision: non-finite features");
  if (!(lambda_rel >= 0.0) || !std::isfinite(lambda_rel)) {
    throw std::invalid_argument("fit_precision: shrinkage must be finite and >= 0");
  }

  const auto kc = static_cast<Eigen::Index>(num_classes);
  Matrix means = Matrix::Zero(kc, d);
  std::vector<std::size_t> counts(num_classes, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw std::invalid_argument(fmt::format("fit_precision: label {} outside [0, {})", y, num_classes));
    }
    means.row(y) += features.row(i);
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) throw std::invalid_argument(fmt::format("fit_precision: class {} has no samples", c));
    means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }

  Matrix centered(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    centered.row(i) = features.row(i) - means.row(labels[static_cast<std::size_t>(i)]);
  }
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose());

  const double trace = cov.trace();
  double lambda = lambda_rel * trace / static_cast<double>(d);
  if (trace == 0.0) lambda = std::max(lambda, kShrinkageFloor);
  cov.diagonal().array() += lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("fit_precision: shrunk covariance is not positive definite");
  }
  Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(d, d));
  prec = 0.5 * (prec + prec.transpose());

  PrecisionModel model;
  model.class_means = std::move(means);
  model.precision = prec;
  model.shrinkage = lambda;
  return model;
}

double Subspace::residual_norm(std::span<const double> z) const {
  const auto d = origin.size();
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), d);
  if (basis.cols() == d) return 0.0;
  const Eigen::VectorXd centered = zv - origin;
  if (basis.cols() == 0) return centered.norm();
  const Eigen::VectorXd coords = basis.transpose() * centered;
  return (centered - basis * coords).norm();
}

Subspace principal_subspace(const Matrix& features, const Vector& origin, std::size_t m) {
  const auto d = features.cols();
  if (m > static_cast<std::size_t>(d)) {
    throw std::invalid_argument(fmt::format("principal_subspace: m = {} exceeds D = {}", m, d));
  }
  if (origin.size() != d) throw std::invalid_argument("principal_subspace: origin length differs from D");

  Subspace out;
  out.origin = origin;
  out.basis.resize(d, static_cast<Eigen::Index>(m));
  if (m == 0) return out;

  const Matrix centered = features.rowwise() - origin.transpose();
  Eigen::MatrixXd scatter = centered.transpose() * centered;
  scatter = 0.5 * (scatter + scatter.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
  if (eig.info() != Eigen::Success) throw std::runtime_error("principal_subspace: eigensolver failed");

  // Eigen returns eigenvalues in ascending order.
  const Eigen::MatrixXd& vecs = eig.eigenvectors();
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(m); ++j) {
    Eigen::VectorXd v = vecs.col(d - 1 - j);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::abs(v[i]) > 1e-10) {
        if (v[i] < 0) v = -v;
        break;
      }
    }
    out.basis.col(j) = v;
  }
  return out;
}

std::vector<double> normalized(std::span<const double> z) {
  double sq = 0.0;
  for (double x : z) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("normalized: zero-norm or non-finite feature row");
  }
  std::vector<double> out(z.begin(), z.end());
  for (auto& x : out) x /= norm;
  return out;
}

NnIndex NnIndex::build(const Matrix& points) {
  Matrix stored(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const std::span<const double> row(points.data() + i * points.cols(),
                                      static_cast<std::size_t>(points.cols()));
    std::vector<double> unit;
    try {
      unit = normalized(row);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument(fmt::format("NnIndex::build: row {} has zero or non-finite norm", i));
    }
    for (Eigen::Index j = 0; j < points.cols(); ++j) stored(i, j) = unit[static_cast<std::size_t>(j)];
  }
  NnIndex index;
  index.points_ = std::move(stored);
  index.built_ = true;
  return index;
}

NnIndex NnIndex::from_normalized(Matrix points) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (std::abs(points.row(i).norm() - 1.0) > 1e-6) {
      throw std::invalid_argument(fmt::format("NnIndex: stored row {} is not unit norm", i));
    }
  }
  NnIndex index;
  index.points_ = std::move(points);
  index.built_ = true;
  return index;
}

double kth_nn_distance(const NnIndex& index, std::span<const double> query, std::size_t k) {
  if (!index.built()) throw std::logic_error("kth_nn_distance: index not built");
  if (k < 1 || k > index.size()) {
    throw std::out_of_range(fmt::format("kth_nn_distance: k = {} outside [1, {}]", k, index.size()));
  }
  if (query.size() != index.dim()) throw std::invalid_argument("kth_nn_distance: query dimension mismatch");
  const std::size_t d = index.dim();
  std::vector<double> dist(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    dist[i] = squared_euclidean(query.data(), index.points().data() + i * d, d);
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
  return std::sqrt(dist[k - 1]);
}

}  // namespace oodbench
