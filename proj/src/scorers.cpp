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

#include "oodbench/scorers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/QR>
#include <fmt/format.h>

#include "oodbench/pack.hpp"

namespace oodbench {

namespace {

constexpr double kKlFloor = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

void ScorerConfig::validate() const {
  if (!(energy_temperature > 0.0) || !std::isfinite(energy_temperature)) {
    throw std::invalid_argument("energy_temperature must be > 0");
  }
  if (!(react_percentile > 0.0 && react_percentile <= 100.0)) {
    throw std::invalid_argument("react_percentile must be in (0, 100]");
  }
  if (knn_k < 1) throw std::invalid_argument("knn_k must be >= 1");
  if (!(dice_sparsity >= 0.0 && dice_sparsity < 1.0)) {
    throw std::invalid_argument("dice_sparsity must be in [0, 1)");
  }
  if (!(mahalanobis_shrinkage >= 0.0) || !std::isfinite(mahalanobis_shrinkage)) {
    throw std::invalid_argument("mahalanobis_shrinkage must be finite and >= 0");
  }
}

std::size_t ScorerConfig::vim_dim_for(std::size_t feature_dim) const {
  return vim_dim.value_or(std::min<std::size_t>(feature_dim, 256));
}

double score_msp(std::span<const double> logits) {
  const auto p = softmax(logits);
  return *std::max_element(p.begin(), p.end());
}

double score_energy(std::span<const double> logits, double temperature) {
  if (temperature == 1.0) return logsumexp(logits);
  std::vector<double> scaled(logits.begin(), logits.end());
  for (auto& x : scaled) x /= temperature;
  return temperature * logsumexp(scaled);
}

double score_gradnorm(std::span<const double> logits, std::span<const double> z) {
  const auto p = softmax(logits);
  const double uniform = 1.0 / static_cast<double>(p.size());
  double prob_term = 0.0;
  for (double pi : p) prob_term += std::abs(pi - uniform);
  double feature_term = 0.0;
  for (double zi : z) feature_term += std::abs(zi);
  return prob_term * feature_term;
}

double fit_react_clip(const Matrix& train_features, double percentile) {
  const auto total = static_cast<std::size_t>(train_features.size());
  if (total == 0) throw std::invalid_argument("ReAct: empty training set");
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("ReAct: percentile must be in (0, 100]");
  }
  std::vector<double> pooled(train_features.data(), train_features.data() + total);
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(total) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, total);
  std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(rank - 1), pooled.end());
  return pooled[rank - 1];
}

double score_react(std::span<const double> z, const ClassifierHead& head, double clip,
                   double temperature) {
  std::vector<double> clipped(z.begin(), z.end());
  for (auto& x : clipped) x = std::min(x, clip);
  const auto logits = head.apply(clipped);
  return score_energy(logits, temperature);
}

PrecisionModel fit_mahalanobis(const Matrix& train_features, std::span<const std::int32_t> labels,
                               std::size_t num_classes, double lambda_rel) {
  return fit_precision(train_features, labels, num_classes, lambda_rel);
}

double score_mahalanobis(const PrecisionModel& model, std::span<const double> z) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.num_classes(); ++k) best = std::min(best, model.squared_distance(z, k));
  return -best;
}

Matrix fit_kl_matching(const Matrix& train_logits, std::span<const std::int32_t> labels) {
  const auto n = train_logits.rows();
  const auto k = train_logits.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw std::invalid_argument("KL-Matching: logits and labels differ in length");
  }
  Matrix templates = Matrix::Zero(k, k);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::span<const double> row(train_logits.data() + i * k, static_cast<std::size_t>(k));
    const auto y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) continue;
    if (static_cast<std::int32_t>(argmax(row)) != y) continue;
    const auto p = softmax(row);
    for (Eigen::Index c = 0; c < k; ++c) templates(y, c) += p[static_cast<std::size_t>(c)];
    ++counts[static_cast<std::size_t>(y)];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw std::invalid_argument(fmt::format("KL-Matching: class {} has no correctly classified training rows", c));
    }
    templates.row(c) /= templates.row(c).sum();
  }
  return templates;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i] * std::log(p[i] / std::max(q[i], kKlFloor));
  }
  return acc;
}

double score_kl_matching(const Matrix& templates, std::span<const double> logits) {
  const auto p = softmax(logits);
  const auto k = static_cast<std::size_t>(templates.cols());
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < templates.rows(); ++c) {
    best = std::min(best, kl_divergence(p, {templates.data() + c * templates.cols(), k}));
  }
  return -best;
}

NnIndex fit_knn(const Matrix& train_features) { return NnIndex::build(train_features); }

double score_knn(const NnIndex& index, std::span<const double> z, std::size_t k) {
  const auto unit = normalized(z);
  return -kth_nn_distance(index, unit, k);
}

VimState fit_vim(const Matrix& train_features, const Matrix& train_logits,
                 const ClassifierHead& head, std::size_t dim) {
  const auto d = static_cast<std::size_t>(train_features.cols());
  if (dim > d) throw std::invalid_argument(fmt::format("ViM: subspace dimension {} exceeds D = {}", dim, d));
  if (!head.weight.allFinite() || !head.bias.allFinite()) throw std::invalid_argument("ViM: non-finite head");
  if (train_features.rows() == 0) throw std::invalid_argument("ViM: empty training set");

  const Eigen::MatrixXd w = head.weight;
  const Vector origin = w.completeOrthogonalDecomposition().solve(-head.bias);

  VimState state;
  state.subspace = principal_subspace(train_features, origin, dim);

  double max_logit_sum = 0.0;
  double residual_sum = 0.0;
  for (Eigen::Index i = 0; i < train_features.rows(); ++i) {
    max_logit_sum += train_logits.row(i).maxCoeff();
    residual_sum += state.subspace.residual_norm(
        {train_features.data() + i * train_features.cols(), d});
  }
  state.alpha = residual_sum > 0.0 ? max_logit_sum / residual_sum : 0.0;
  return state;
}

double score_vim(const VimState& state, std::span<const double> z, std::span<const double> logits) {
  return logsumexp(logits) - state.alpha * state.subspace.residual_norm(z);
}

std::vector<std::uint8_t> fit_dice(const Matrix& train_features, const ClassifierHead& head,
                                   double sparsity) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw std::invalid_argument("DICE: sparsity must be in [0, 1)");
  if (train_features.rows() == 0) throw std::invalid_argument("DICE: empty training set");
  const auto d = static_cast<std::size_t>(head.feature_dim());
  const auto k = head.num_classes();
  const Vector mean = train_features.colwise().mean().transpose();

  auto keep = static_cast<std::size_t>(std::ceil((1.0 - sparsity) * static_cast<double>(d) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, d);

  std::vector<std::uint8_t> mask(k * d, 0);
  std::vector<std::size_t> order(d);
  std::vector<double> contrib(d);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      contrib[j] = head.weight(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) *
                   mean[static_cast<Eigen::Index>(j)];
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return contrib[a] > contrib[b]; });
    for (std::size_t r = 0; r < keep; ++r) mask[c * d + order[r]] = 1;
  }
  return mask;
}

double score_dice(const DiceState& state, std::span<const double> z) {
  const auto& head = state.head;
  const std::size_t k = head.num_classes();
  const std::size_t d = head.feature_dim();
  std::vector<double> logits(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double* w = head.weight.data() + c * d;
    const std::uint8_t* m = state.keep_mask.data() + c * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (m[j]) acc += w[j] * z[j];
    }
    logits[c] = acc + head.bias[static_cast<Eigen::Index>(c)];
  }
  return logsumexp(logits);
}

FittedScorer fit_scorer(Method method, const FeaturePack& train, const ClassifierHead& head,
                        const ScorerConfig& config) {
  config.validate();
  if (train.rows() == 0) throw std::invalid_argument("training pack is empty");
  if (head.feature_dim() != train.feature_dim() || head.num_classes() != train.num_classes()) {
    throw std::invalid_argument("head dimensions do not match the training pack");
  }
  FittedScorer out;
  out.method = method;
  out.feature_dim = train.feature_dim();
  out.num_classes = train.num_classes();
  switch (method) {
    case Method::Msp:
      out.state = MspState{};
      break;
    case Method::Energy:
      out.state = EnergyState{config.energy_temperature};
      break;
    case Method::GradNorm:
      out.state = GradNormState{};
      break;
    case Method::React:
      out.state = ReactState{fit_react_clip(train.features, config.react_percentile),
                             config.energy_temperature, head};
      break;
    case Method::Mahalanobis:
      out.state = MahalanobisState{
          fit_mahalanobis(train.features, train.labels, train.num_classes(), config.mahalanobis_shrinkage)};
      break;
    case Method::KlMatching:
      out.state = KlMatchingState{fit_kl_matching(train.logits, train.labels)};
      break;
    case Method::Knn: {
      if (config.knn_k > train.rows()) {
        throw std::invalid_argument(
            fmt::format("KNN: k = {} exceeds the {} training rows", config.knn_k, train.rows()));
      }
      out.state = KnnState{fit_knn(train.features), config.knn_k};
      break;
    }
    case Method::Vim:
      out.state = fit_vim(train.features, train.logits, head, config.vim_dim_for(train.feature_dim()));
      break;
    case Method::Dice:
      out.state = DiceState{fit_dice(train.features, head, config.dice_sparsity), head};
      break;
  }
  return out;
}

double score_row(const FittedScorer& scorer, std::span<const double> z, std::span<const double> logits) {
  return std::visit(
      Overloaded{
          [&](const MspState&) { return score_msp(logits); },
          [&](const EnergyState& s) { return score_energy(logits, s.temperature); },
          [&](const GradNormState&) { return score_gradnorm(logits, z); },
          [&](const ReactState& s) { return score_react(z, s.head, s.clip, s.temperature); },
          [&](const MahalanobisState& s) { return score_mahalanobis(s.model, z); },
          [&](const KlMatchingState& s) { return score_kl_matching(s.templates, logits); },
          [&](const KnnState& s) { return score_knn(s.index, z, s.k); },
          [&](const VimState& s) { return score_vim(s, z, logits); },
          [&](const DiceState& s) { return score_dice(s, z); },
      },
      scorer.state);
}

FitAllResult try_fit_all(const FeaturePack& train, const ClassifierHead& head,
                         const ScorerConfig& config, std::span<const Method> methods, int workers) {
  const auto n = static_cast<std::ptrdiff_t>(methods.size());
  std::vector<std::optional<FittedScorer>> fitted(methods.size());
  std::vector<std::string> errors(methods.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(workers, 1))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      fitted[static_cast<std::size_t>(i)] = fit_scorer(methods[static_cast<std::size_t>(i)], train, head, config);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }

  FitAllResult result;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (fitted[i]) {
      result.fitted.emplace(methods[i], std::move(*fitted[i]));
    } else {
      result.failures.emplace(methods[i], errors[i]);
    }
  }
  return result;
}

std::map<Method, FittedScorer> fit_all(const FeaturePack& train, const ClassifierHead& head,
                                       const ScorerConfig& config, int workers) {
  auto result = try_fit_all(train, head, config, kAllMethods, workers);
  if (!result.failures.empty()) {
    std::string message = "fit failed for:";
    for (const auto& [method, err] : result.failures) {
      message += fmt::format(" {} ({});", display_name(method), err);
    }
    throw FitError(message, std::move(result.failures));
  }
  return std::move(result.fitted);
}

}  // namespace oodbench
