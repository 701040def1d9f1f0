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

#include "oodbench/metrics.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <stdexcept>

namespace oodbench {

namespace {

void require_nonempty(std::span<const double> id, std::span<const double> ood, const char* what) {
  if (id.empty() || ood.empty()) throw std::invalid_argument(std::string(what) + ": empty score set");
}

std::uint64_t count_above(std::span<const double> scores, double gamma) {
  return static_cast<std::uint64_t>(std::count_if(scores.begin(), scores.end(), [&](double s) { return s > gamma; }));
}

}  // namespace

ConfusionMatrix confusion_conventional(std::span<const double> scores_id,
                                       std::span<const double> scores_ood, double gamma) {
  ConfusionMatrix cm;
  cm.mode = ConfusionMode::Conventional;
  cm.tp = count_above(scores_id, gamma);
  cm.fn = scores_id.size() - cm.tp;
  cm.fp = count_above(scores_ood, gamma);
  cm.tn = scores_ood.size() - cm.fp;
  return cm;
}

double fpr_at_tpr(std::span<const double> scores_id, std::span<const double> scores_ood, double target_tpr) {
  require_nonempty(scores_id, scores_ood, "fpr_at_tpr");
  const auto n_id = scores_id.size();
  const auto as_rate = [n_id](std::size_t m) { return static_cast<double>(m) / static_cast<double>(n_id); };

  // Smallest number of kept ID examples whose rate meets the target, using
  // the same floating comparison a threshold sweep would.
  std::size_t m = 0;
  while (m < n_id && as_rate(m) < target_tpr) ++m;
  if (as_rate(m) < target_tpr) return 1.0;
  if (m == 0) return 0.0;

  // TPR(gamma) >= target iff gamma < s, with s the m-th largest ID score.
  // The largest threshold among observed scores (or -inf) below s keeps
  // exactly the OOD scores >= s.
  std::vector<double> sorted(scores_id.begin(), scores_id.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m - 1), sorted.end(),
                   std::greater<>());
  const double s = sorted[m - 1];
  const auto fp = std::count_if(scores_ood.begin(), scores_ood.end(), [&](double x) { return x >= s; });
  return static_cast<double>(fp) / static_cast<double>(scores_ood.size());
}

double auroc(std::span<const double> scores_id, std::span<const double> scores_ood) {
  require_nonempty(scores_id, scores_ood, "auroc");
  struct Entry {
    double score;
    bool is_id;
  };
  std::vector<Entry> all;
  all.reserve(scores_id.size() + scores_ood.size());
  for (double s : scores_id) all.push_back({s, true});
  for (double s : scores_ood) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  std::uint64_t greater = 0;
  std::uint64_t ties = 0;
  std::uint64_t ood_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t id_group = 0;
    std::uint64_t ood_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].is_id ? id_group : ood_group)++;
      ++j;
    }
    greater += id_group * ood_below;
    ties += id_group * ood_group;
    ood_below += ood_group;
    i = j;
  }
  const double pairs = static_cast<double>(scores_id.size()) * static_cast<double>(scores_ood.size());
  return (static_cast<double>(greater) + 0.5 * static_cast<double>(ties)) / pairs;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores_id, std::span<const double> scores_ood) {
  require_nonempty(scores_id, scores_ood, "roc_curve");
  std::vector<double> thresholds(scores_id.begin(), scores_id.end());
  thresholds.insert(thresholds.end(), scores_ood.begin(), scores_ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(-std::numeric_limits<double>::infinity());

  std::vector<RocPoint> curve;
  curve.reserve(thresholds.size());
  for (double gamma : thresholds) {
    const auto cm = confusion_conventional(scores_id, scores_ood, gamma);
    curve.push_back({gamma, static_cast<double>(cm.tp) / static_cast<double>(scores_id.size()),
                     static_cast<double>(cm.fp) / static_cast<double>(scores_ood.size())});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

ConfusionMatrix confusion_human(std::span<const double> scores, std::span<const std::uint8_t> y_cor,
                                double gamma) {
  if (scores.size() != y_cor.size()) throw std::invalid_argument("confusion_human: length mismatch");
  ConfusionMatrix cm;
  cm.mode = ConfusionMode::HumanCentric;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool kept = scores[i] > gamma;
    if (y_cor[i]) {
      (kept ? cm.tp : cm.fn)++;
    } else {
      (kept ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

ConfusionMatrix confusion_human(std::span<const double> scores, std::span<const std::uint8_t> y_cor,
                                const Threshold& gamma) {
  return confusion_human(scores, y_cor, gamma.value());
}

double der(std::span<const double> scores, std::span<const std::uint8_t> y_cor, double gamma) {
  if (scores.empty()) throw std::invalid_argument("der: empty score set");
  const auto cm = confusion_human(scores, y_cor, gamma);
  return static_cast<double>(cm.fn + cm.fp) / static_cast<double>(cm.total());
}

double der(std::span<const double> scores, std::span<const std::uint8_t> y_cor, const Threshold& gamma) {
  return der(scores, y_cor, gamma.value());
}

}  // namespace oodbench
