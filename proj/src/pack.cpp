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

#include "oodbench/pack.hpp"

#include <cmath>

#include <fmt/format.h>

namespace oodbench {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

std::vector<std::string> validate_pack(const FeaturePack& pack) {
  std::vector<std::string> out;
  const std::size_t n = pack.rows();
  if (n < 1) out.push_back("pack must contain at least one row");
  if (pack.feature_dim() < 1) out.push_back("feature dimension D must be >= 1");
  if (pack.num_classes() < 2) out.push_back("class count K must be >= 2");
  if (static_cast<std::size_t>(pack.logits.rows()) != n) {
    out.push_back(fmt::format("logits have {} rows but features have {}", pack.logits.rows(), n));
  }
  if (pack.labels.size() != n) {
    out.push_back(fmt::format("labels have length {} but features have {} rows", pack.labels.size(), n));
  }
  if (!all_finite(pack.features)) out.push_back("features contain non-finite entries");
  if (!all_finite(pack.logits)) out.push_back("logits contain non-finite entries");

  const auto k = static_cast<std::int64_t>(pack.num_classes());
  for (std::size_t i = 0; i < pack.labels.size(); ++i) {
    const std::int32_t y = pack.labels[i];
    if (pack.kind == DatasetKind::LabelShift) {
      if (y != kNoLabel) {
        out.push_back(fmt::format("row {}: label must be -1 for a label_shift pack, got {}", i, y));
        break;
      }
    } else if (y < 0 || y >= k) {
      out.push_back(fmt::format("row {}: label {} outside [0, {})", i, y, k));
      break;
    }
  }
  return out;
}

std::vector<std::string> validate_pack(const FeaturePack& pack, const ClassifierHead& head) {
  auto out = validate_pack(pack);
  if (head.feature_dim() != pack.feature_dim() || head.num_classes() != pack.num_classes() ||
      static_cast<std::size_t>(head.bias.size()) != head.num_classes()) {
    out.push_back(fmt::format("head is {}x{} with bias {}, pack has D={} K={}", head.num_classes(),
                              head.feature_dim(), head.bias.size(), pack.feature_dim(),
                              pack.num_classes()));
    return out;
  }
  if (!head.weight.allFinite() || !head.bias.allFinite()) {
    out.push_back("head contains non-finite entries");
    return out;
  }
  if (static_cast<std::size_t>(pack.logits.rows()) != pack.rows()) return out;

  double worst = 0.0;
  std::size_t worst_row = 0;
  for (std::size_t i = 0; i < pack.rows(); ++i) {
    const auto recomputed = head.apply(pack.feature_row(i));
    const auto stored = pack.logit_row(i);
    for (std::size_t c = 0; c < recomputed.size(); ++c) {
      const double dev = std::abs(recomputed[c] - stored[c]);
      if (!(dev <= worst)) {
        worst = dev;
        worst_row = i;
      }
    }
  }
  if (!(worst <= kHeadConsistencyTolerance)) {
    out.push_back(fmt::format("logits inconsistent with head: max |W z + b - logits| = {:.6g} at row {} (tolerance {})",
                              worst, worst_row, kHeadConsistencyTolerance));
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

CorrectnessVector correctness(const FeaturePack& pack) {
  CorrectnessVector out;
  out.values.assign(pack.rows(), 0);
  if (pack.kind == DatasetKind::LabelShift) return out;
  for (std::size_t i = 0; i < pack.rows(); ++i) {
    const auto pred = argmax(pack.logit_row(i));
    out.values[i] = static_cast<std::int64_t>(pred) == pack.labels[i] ? 1 : 0;
  }
  return out;
}

}  // namespace oodbench
