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

#include "oodbench/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace oodbench::kernels {

namespace {

constexpr std::ptrdiff_t kQueryTile = 32;
constexpr std::size_t kIndexTile = 1024;

void check_shapes(const FittedScorer& scorer, const Matrix& features, const Matrix& logits) {
  if (features.rows() != logits.rows()) throw std::invalid_argument("score_rows: features and logits row counts differ");
  if (static_cast<std::size_t>(features.cols()) != scorer.feature_dim ||
      static_cast<std::size_t>(logits.cols()) != scorer.num_classes) {
    throw std::invalid_argument(fmt::format("score_rows: pack is D={} K={}, scorer expects D={} K={}", features.cols(),
                                            logits.cols(), scorer.feature_dim, scorer.num_classes));
  }
}

std::span<const double> row_of(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

Matrix normalized_rows(const Matrix& features) {
  Matrix out(features.rows(), features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    std::vector<double> unit;
    try {
      unit = normalized(row_of(features, i));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument(fmt::format("KNN: feature row {} has zero norm", i));
    }
    std::copy(unit.begin(), unit.end(), out.data() + i * out.cols());
  }
  return out;
}

void check_k(const NnIndex& index, std::size_t k) {
  if (!index.built()) throw std::logic_error("kth_nn_distances: index not built");
  if (k < 1 || k > index.size()) {
    throw std::out_of_range(fmt::format("kth_nn_distances: k = {} outside [1, {}]", k, index.size()));
  }
}

}  // namespace

int resolve_workers(int fallback) {
  if (const char* env = std::getenv("OODBENCH_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(fallback, 1);
}

namespace serial {

std::vector<double> score_rows(const FittedScorer& scorer, const Matrix& features, const Matrix& logits) {
  check_shapes(scorer, features, logits);
  std::vector<double> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = score_row(scorer, row_of(features, i), row_of(logits, i));
  }
  return out;
}

std::vector<double> kth_nn_distances(const NnIndex& index, const Matrix& queries, std::size_t k) {
  check_k(index, k);
  std::vector<double> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    out[static_cast<std::size_t>(q)] = kth_nn_distance(index, row_of(queries, q), k);
  }
  return out;
}

}  // namespace serial

namespace omp {

std::vector<double> kth_nn_distances(const NnIndex& index, const Matrix& queries, std::size_t k,
                                     int workers) {
  check_k(index, k);
  if (static_cast<std::size_t>(queries.cols()) != index.dim()) {
    throw std::invalid_argument("kth_nn_distances: query dimension mismatch");
  }
  const std::size_t n_index = index.size();
  const std::size_t d = index.dim();
  const std::ptrdiff_t n_queries = queries.rows();
  const std::ptrdiff_t n_tiles = (n_queries + kQueryTile - 1) / kQueryTile;
  std::vector<double> out(static_cast<std::size_t>(n_queries));

#pragma omp parallel num_threads(std::max(workers, 1))
  {
    std::vector<double> dist(static_cast<std::size_t>(kQueryTile) * n_index);
#pragma omp for schedule(static)
    for (std::ptrdiff_t tile = 0; tile < n_tiles; ++tile) {
      const std::ptrdiff_t q0 = tile * kQueryTile;
      const std::ptrdiff_t q1 = std::min(q0 + kQueryTile, n_queries);
      for (std::size_t i0 = 0; i0 < n_index; i0 += kIndexTile) {
        const std::size_t i1 = std::min(i0 + kIndexTile, n_index);
        for (std::ptrdiff_t q = q0; q < q1; ++q) {
          const double* qp = queries.data() + q * queries.cols();
          double* drow = dist.data() + static_cast<std::size_t>(q - q0) * n_index;
          for (std::size_t i = i0; i < i1; ++i) {
            drow[i] = squared_euclidean(qp, index.points().data() + i * d, d);
          }
        }
      }
      for (std::ptrdiff_t q = q0; q < q1; ++q) {
        double* drow = dist.data() + static_cast<std::size_t>(q - q0) * n_index;
        std::nth_element(drow, drow + (k - 1), drow + n_index);
        out[static_cast<std::size_t>(q)] = std::sqrt(drow[k - 1]);
      }
    }
  }
  return out;
}

std::vector<double> score_rows(const FittedScorer& scorer, const Matrix& features, const Matrix& logits,
                               int workers) {
  check_shapes(scorer, features, logits);
  if (const auto* knn = std::get_if<KnnState>(&scorer.state)) {
    auto dists = kth_nn_distances(knn->index, normalized_rows(features), knn->k, workers);
    for (auto& x : dists) x = -x;
    return dists;
  }

  const std::ptrdiff_t n = features.rows();
  std::vector<double> out(static_cast<std::size_t>(n));
  std::exception_ptr failure;
  std::once_flag failure_once;
#pragma omp parallel for schedule(static) num_threads(std::max(workers, 1))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = score_row(scorer, row_of(features, i), row_of(logits, i));
    } catch (...) {
      std::call_once(failure_once, [&] { failure = std::current_exception(); });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace omp

ScoreVector score_pack(const FittedScorer& scorer, const FeaturePack& pack, int workers) {
  ScoreVector out;
  out.method = scorer.method;
  out.dataset_id = pack.dataset_id;
  out.scores = omp::score_rows(scorer, pack.features, pack.logits, workers);
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (!std::isfinite(out.scores[i])) {
      throw std::runtime_error(fmt::format("{}: non-finite score at row {} of {}", display_name(scorer.method), i,
                                           pack.dataset_id));
    }
  }
  return out;
}

}  // namespace oodbench::kernels
