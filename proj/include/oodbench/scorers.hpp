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

#ifndef OODBENCH_SCORERS_HPP_
#define OODBENCH_SCORERS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "oodbench/numerics.hpp"
#include "oodbench/types.hpp"

// All scores follow one orientation: larger means more in-distribution, so a
// single reject rule (score <= threshold) applies to every method. Distances
// and divergences are negated at this boundary.

namespace oodbench {

struct ScorerConfig {
  double energy_temperature = 1.0;
  double react_percentile = 90.0;  // (0, 100]
  std::size_t knn_k = 50;
  std::optional<std::size_t> vim_dim;  // default min(D, 256)
  double dice_sparsity = 0.9;          // [0, 1)
  double mahalanobis_shrinkage = kDefaultShrinkage;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
  std::size_t vim_dim_for(std::size_t feature_dim) const;
};

// --- Per-method fitted state --------------------------------------------------

struct MspState {};
struct EnergyState {
  double temperature = 1.0;
};
struct ReactState {
  double clip = 0.0;
  double temperature = 1.0;
  ClassifierHead head;
};
struct MahalanobisState {
  PrecisionModel model;
};
struct KlMatchingState {
  Matrix templates;  // K x K, row k is the mean posterior of class k
};
struct GradNormState {};
struct KnnState {
  NnIndex index;
  std::size_t k = 1;
};
struct VimState {
  Subspace subspace;
  double alpha = 0.0;
};
struct DiceState {
  std::vector<std::uint8_t> keep_mask;  // K x D row-major, 1 = weight kept
  ClassifierHead head;
};

using ScorerState = std::variant<MspState, MahalanobisState, KlMatchingState, EnergyState,
                                 ReactState, GradNormState, KnnState, VimState, DiceState>;

/// Immutable fitted scorer. Score with score_row or the batch kernels.
struct FittedScorer {
  Method method = Method::Msp;
  ScorerState state;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
};

class FitError : public std::runtime_error {
 public:
  FitError(std::string message, std::map<Method, std::string> failures)
      : std::runtime_error(std::move(message)), failures_(std::move(failures)) {}
  const std::map<Method, std::string>& failures() const { return failures_; }

 private:
  std::map<Method, std::string> failures_;
};

// --- Stateless criteria -------------------------------------------------------

/// Maximum softmax probability.
double score_msp(std::span<const double> logits);
/// T * logsumexp(l / T).
double score_energy(std::span<const double> logits, double temperature = 1.0);
/// ||softmax(l) - 1/K||_1 * ||z||_1, the L1 norm of the gradient of
/// KL(uniform || softmax(W z + b)) with respect to W.
double score_gradnorm(std::span<const double> logits, std::span<const double> z);

// --- Fitted criteria ----------------------------------------------------------

/// Lower order statistic of all pooled activation entries at `percentile`.
double fit_react_clip(const Matrix& train_features, double percentile);
double score_react(std::span<const double> z, const ClassifierHead& head, double clip,
                   double temperature = 1.0);

PrecisionModel fit_mahalanobis(const Matrix& train_features, std::span<const std::int32_t> labels,
                               std::size_t num_classes, double lambda_rel = kDefaultShrinkage);
/// -min_k (z - mu_k)^T P (z - mu_k)
double score_mahalanobis(const PrecisionModel& model, std::span<const double> z);

/// Mean softmax of correctly classified rows per ground-truth class,
/// renormalised. Throws if some class has no correctly classified row.
Matrix fit_kl_matching(const Matrix& train_logits, std::span<const std::int32_t> labels);
/// KL(p || q) with 0 ln 0 = 0 and q floored at 1e-12.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double score_kl_matching(const Matrix& templates, std::span<const double> logits);

NnIndex fit_knn(const Matrix& train_features);
/// -(distance from z/||z|| to its k-th nearest stored row).
double score_knn(const NnIndex& index, std::span<const double> z, std::size_t k);

/// Origin u (minimum-norm solution of W u = -b), principal subspace of the
/// training features around u, and alpha = mean max-logit / mean residual.
VimState fit_vim(const Matrix& train_features, const Matrix& train_logits,
                 const ClassifierHead& head, std::size_t dim);
/// logsumexp(l) - alpha * residual(z). A strictly monotone transform of the
/// virtual-logit probability, so rankings are unchanged.
double score_vim(const VimState& state, std::span<const double> z, std::span<const double> logits);

/// Per class, keeps the ceil((1 - s) D) weights with largest contribution
/// W_kd * mean_d; ties go to the lower feature index.
std::vector<std::uint8_t> fit_dice(const Matrix& train_features, const ClassifierHead& head,
                                   double sparsity);
double score_dice(const DiceState& state, std::span<const double> z);

// --- Uniform interface --------------------------------------------------------

/// Fits one method on the (already correctness-restricted) training pack.
FittedScorer fit_scorer(Method method, const FeaturePack& train, const ClassifierHead& head,
                        const ScorerConfig& config);

/// Scores one example given its feature row and logit row.
double score_row(const FittedScorer& scorer, std::span<const double> z,
                 std::span<const double> logits);

struct FitAllResult {
  std::map<Method, FittedScorer> fitted;
  std::map<Method, std::string> failures;
};

/// Fits every requested method; failures are collected, not thrown.
/// Methods are fitted in parallel over `workers` threads.
FitAllResult try_fit_all(const FeaturePack& train, const ClassifierHead& head,
                         const ScorerConfig& config, std::span<const Method> methods,
                         int workers = 1);

/// Fits all nine methods. Throws FitError naming every failed method.
std::map<Method, FittedScorer> fit_all(const FeaturePack& train, const ClassifierHead& head,
                                       const ScorerConfig& config, int workers = 1);

}  // namespace oodbench

#endif  // OODBENCH_SCORERS_HPP_
