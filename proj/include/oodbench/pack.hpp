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

#ifndef OODBENCH_PACK_HPP_
#define OODBENCH_PACK_HPP_

#include <span>
#include <string>
#include <vector>

#include "oodbench/types.hpp"

namespace oodbench {

/// Maximum allowed |weight * z + bias - logits| for a pack exported from the
/// same model as the head. Exports are float32, so recomputation differs by
/// rounding.
inline constexpr double kHeadConsistencyTolerance = 1e-3;

/// Returns every invariant violation of `pack`, alone and against `head`.
/// An empty list means the pack is valid. Never throws.
std::vector<std::string> validate_pack(const FeaturePack& pack, const ClassifierHead& head);

/// Same checks without the head (shape, finiteness, label range).
std::vector<std::string> validate_pack(const FeaturePack& pack);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// y_cor for every row. All zeros for label-shift packs.
CorrectnessVector correctness(const FeaturePack& pack);

}  // namespace oodbench

#endif  // OODBENCH_PACK_HPP_
