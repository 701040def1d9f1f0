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

#ifndef OODBENCH_METRICS_HPP_
#define OODBENCH_METRICS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "oodbench/types.hpp"

// Boundary rule used by every function here: a score equal to the threshold
// is rejected. An example is kept (counted positive) iff score > gamma.

namespace oodbench {

/// tp/fn over ID scores, fp/tn over OOD scores.
ConfusionMatrix confusion_conventional(std::span<const double> scores_id,
                                       std::span<const double> scores_ood, double gamma);

/// FPR at the largest threshold whose TPR reaches `target_tpr`.
/// Throws std::invalid_argument if either side is empty.
double fpr_at_tpr(std::span<const double> scores_id, std::span<const double> scores_ood,
                  double target_tpr = 0.95);

/// Probability that a random ID score exceeds a random OOD score, ties
/// counting one half. O(N log N) rank computation with exact integer counts.
double auroc(std::span<const double> scores_id, std::span<const double> scores_ood);

struct RocPoint {
  double threshold;
  double tpr;
  double fpr;
};

/// ROC sweep: one point per distinct score (descending) plus a final
/// +inf-to--inf pair, so the curve runs from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores_id, std::span<const double> scores_ood);

/// Trapezoidal area under a ROC curve (fpr on the x axis).
double trapezoid_area(std::span<const RocPoint> curve);

ConfusionMatrix confusion_human(std::span<const double> scores, std::span<const std::uint8_t> y_cor,
                                double gamma);
ConfusionMatrix confusion_human(std::span<const double> scores, std::span<const std::uint8_t> y_cor,
                                const Threshold& gamma);

/// Detection error rate (fn + fp) / N. Throws on N = 0 or length mismatch.
double der(std::span<const double> scores, std::span<const std::uint8_t> y_cor, double gamma);
double der(std::span<const double> scores, std::span<const std::uint8_t> y_cor, const Threshold& gamma);

}  // namespace oodbench

#endif  // OODBENCH_METRICS_HPP_
