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

#ifndef OODBENCH_NUMERICS_HPP_
#define OODBENCH_NUMERICS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "oodbench/types.hpp"

namespace oodbench {

/// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> v);

/// log(sum(exp(v))), stable for large magnitudes.
double logsumexp(std::span<const double> v);

/// Lower order statistic threshold keeping a fraction `keep_fraction` of
/// `scores` under the strict keep rule score > threshold.
///
/// With k = floor((1 - p) * N): k == 0 gives BelowAll, otherwise the
/// threshold is the k-th smallest score. Throws std::invalid_argument on
/// empty input, non-finite scores or p outside (0, 1).
Threshold reject_threshold(std::span<const double> scores, double keep_fraction);

/// Number of scores a threshold at keep fraction p rejects by construction.
std::size_t reject_count(std::size_t n, double keep_fraction);

/// Class centroids and the inverse of the shrunk shared covariance.
struct PrecisionModel {
  Matrix class_means;  // K x D
  Matrix precision;    // D x D
  double shrinkage = 0.0;

  std::size_t num_classes() const { return static_cast<std::size_t>(class_means.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(precision.rows()); }

  /// (z - mu_k)^T P (z - mu_k)
  double squared_distance(std::span<const double> z, std::size_t k) const;
};

inline constexpr double kDefaultShrinkage = 1e-6;
/// Absolute shrinkage used when the pooled covariance has zero trace.
inline constexpr double kShrinkageFloor = 1e-12;

/// Fits class means and the shared class-centred covariance
/// Sigma = (1/N) sum_i (z_i - mu_{y_i})(z_i - mu_{y_i})^T, adds
/// lambda = lambda_rel * trace(Sigma) / D to the diagonal and inverts it by
/// Cholesky. Throws std::invalid_argument if a class in [0, num_classes) has
/// no rows, on non-finite input, or if the shrunk matrix is not positive
/// definite.
PrecisionModel fit_precision(const Matrix& features, std::span<const std::int32_t> labels,
                             std::size_t num_classes, double lambda_rel = kDefaultShrinkage);

/// Affine principal subspace: origin + span(basis).
struct Subspace {
  Vector origin;  // D
  Matrix basis;   // D x m, orthonormal columns

  std::size_t dim() const { return static_cast<std::size_t>(origin.size()); }
  std::size_t rank() const { return static_cast<std::size_t>(basis.cols()); }

  /// || (z - origin) - B B^T (z - origin) ||_2. Exactly zero when the basis
  /// spans the whole space.
  double residual_norm(std::span<const double> z) const;
};

/// Top-m eigenvectors (descending eigenvalue) of (Z - origin)^T (Z - origin).
/// Each column's first component with magnitude above 1e-10 is positive.
/// Throws std::invalid_argument if m > D.
Subspace principal_subspace(const Matrix& features, const Vector& origin, std::size_t m);

/// Exact nearest-neighbour index over unit-normalised reference rows.
class NnIndex {
 public:
  NnIndex() = default;

  /// Normalises every row of `points` to unit L2 norm. Throws
  /// std::invalid_argument on zero or non-finite rows.
  static NnIndex build(const Matrix& points);
  /// Wraps rows that are already unit-normalised (deserialisation path).
  /// Throws if any row deviates from unit norm by more than 1e-6.
  static NnIndex from_normalized(Matrix points);

  bool built() const { return built_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }
  const Matrix& points() const { return points_; }
  std::span<const double> row(std::size_t i) const { return {points_.data() + i * dim(), dim()}; }

 private:
  Matrix points_;
  bool built_ = false;
};

/// Unit-normalised copy of z. Throws std::invalid_argument on a zero vector.
std::vector<double> normalized(std::span<const double> z);

/// Euclidean distance from `query` to its k-th closest stored row
/// (1-based, duplicates counted). Throws std::out_of_range unless
/// 1 <= k <= index.size().
double kth_nn_distance(const NnIndex& index, std::span<const double> query, std::size_t k);

/// Shared per-pair kernel so serial and parallel paths agree bit-for-bit.
inline double squared_euclidean(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace oodbench

#endif  // OODBENCH_NUMERICS_HPP_
