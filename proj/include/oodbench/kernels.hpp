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

#ifndef OODBENCH_KERNELS_HPP_
#define OODBENCH_KERNELS_HPP_

// Batch kernels. Every kernel exists twice: a plain serial loop kept as the
// reference, and an OpenMP version that splits rows across threads and
// writes each result to its own slot. Per-row arithmetic is shared, so both
// produce bit-identical output for any thread count.

#include <span>
#include <vector>

#include "oodbench/numerics.hpp"
#include "oodbench/scorers.hpp"
#include "oodbench/types.hpp"

namespace oodbench::kernels {

/// Worker count from OODBENCH_WORKERS if set and positive, else `fallback`.
int resolve_workers(int fallback);

namespace serial {

std::vector<double> score_rows(const FittedScorer& scorer, const Matrix& features, const Matrix& logits);

/// k-th nearest distance for every (already unit-norm) query row.
std::vector<double> kth_nn_distances(const NnIndex& index, const Matrix& queries, std::size_t k);

}  // namespace serial

namespace omp {

std::vector<double> score_rows(const FittedScorer& scorer, const Matrix& features, const Matrix& logits,
                               int workers);

/// Blocked brute force: queries are processed in tiles so each tile of index
/// rows is reused while it is hot in cache.
std::vector<double> kth_nn_distances(const NnIndex& index, const Matrix& queries, std::size_t k,
                                     int workers);

}  // namespace omp

/// Scores every row of `pack` using the OpenMP kernels.
ScoreVector score_pack(const FittedScorer& scorer, const FeaturePack& pack, int workers = 1);

}  // namespace oodbench::kernels

#endif  // OODBENCH_KERNELS_HPP_
