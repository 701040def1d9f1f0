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

#ifndef OODBENCH_TYPES_HPP_
#define OODBENCH_TYPES_HPP_

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace oodbench {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Label value used for rows that have no in-vocabulary class.
inline constexpr std::int32_t kNoLabel = -1;

/// Which region of the input space a dataset occupies.
enum class DatasetKind { IdTrain, Validation, InputShift, LabelShift };

std::string_view to_string(DatasetKind kind);
std::optional<DatasetKind> parse_dataset_kind(std::string_view name);

/// The nine post-hoc criteria, in report order.
enum class Method { Msp, Mahalanobis, KlMatching, Energy, React, GradNorm, Knn, Vim, Dice };

inline constexpr std::array<Method, 9> kAllMethods = {
    Method::Msp,   Method::Mahalanobis, Method::KlMatching, Method::Energy, Method::React,
    Method::GradNorm, Method::Knn,       Method::Vim,        Method::Dice};

/// Machine name, e.g. "kl_matching". Used in config files, CSV and file names.
std::string_view to_string(Method method);
/// Human name used in Markdown tables, e.g. "KL-Matching".
std::string_view display_name(Method method);
std::optional<Method> parse_method(std::string_view name);

/// One dataset's exported tensors. Features and logits are held in double
/// precision; on disk they are float32.
struct FeaturePack {
  std::string dataset_id;
  DatasetKind kind = DatasetKind::Validation;
  Matrix features;  // N x D
  Matrix logits;    // N x K
  std::vector<std::int32_t> labels;
  std::string model_id;
  std::string created_utc;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(logits.cols()); }

  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * feature_dim(), feature_dim()};
  }
  std::span<const double> logit_row(std::size_t i) const {
    return {logits.data() + i * num_classes(), num_classes()};
  }

  /// Copy of the pack keeping only the given rows, in the given order.
  FeaturePack select_rows(std::span<const std::size_t> rows) const;
};

/// Final linear layer: logits = weight * z + bias.
struct ClassifierHead {
  Matrix weight;  // K x D
  Vector bias;    // K
  std::string model_id;
  std::string created_utc;

  std::size_t num_classes() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(weight.cols()); }

  /// weight * z + bias for a single feature row.
  std::vector<double> apply(std::span<const double> z) const;
};

/// Per-example criterion values. Larger means "more in-distribution".
struct ScoreVector {
  Method method = Method::Msp;
  std::string dataset_id;
  std::vector<double> scores;
};

/// Reject threshold. Examples with score <= value are rejected; the
/// BelowAll threshold rejects nothing.
class Threshold {
 public:
  bool below_all() const { return !value_.has_value(); }
  /// Threshold value, or -infinity for BelowAll.
  double value() const { return value_.value_or(-std::numeric_limits<double>::infinity()); }
  double keep_fraction() const { return keep_fraction_; }
  bool keeps(double score) const { return below_all() || score > *value_; }

 private:
  friend Threshold reject_threshold(std::span<const double> scores, double keep_fraction);
  Threshold(std::optional<double> value, double keep_fraction)
      : value_(value), keep_fraction_(keep_fraction) {}

  std::optional<double> value_;
  double keep_fraction_;
};

enum class ConfusionMode { Conventional, HumanCentric };

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fn = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  ConfusionMode mode = ConfusionMode::Conventional;

  std::uint64_t total() const { return tp + fn + fp + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// 1 where the model's top-1 prediction matches the ground truth.
struct CorrectnessVector {
  std::vector<std::uint8_t> values;

  std::size_t size() const { return values.size(); }
  std::size_t count_correct() const;
  /// Indices of rows with value 1, ascending.
  std::vector<std::size_t> correct_rows() const;
};

enum class EvalMode { HumanCentric, Conventional };
enum class IdDefinition { AllValidation, CorrectOnly };

std::string_view to_string(EvalMode mode);
std::string_view to_string(IdDefinition def);
std::optional<EvalMode> parse_eval_mode(std::string_view name);
std::optional<IdDefinition> parse_id_definition(std::string_view name);

inline constexpr std::string_view kAverageRow = "Average";

/// One (method, dataset) row of a report; `values` is aligned with
/// EvalReport::metric_names.
struct ReportRow {
  Method method = Method::Msp;
  std::string dataset_id;
  std::vector<double> values;
};

struct EvalReport {
  EvalMode mode = EvalMode::HumanCentric;
  std::vector<std::string> metric_names;  // e.g. {"DER99", "DER95"} or {"FPR95", "AUROC"}
  std::vector<std::string> datasets;      // column order, without "Average"
  std::vector<ReportRow> rows;            // per-dataset rows followed by Average rows

  // Metadata. Not part of the CSV.
  std::string model_id;
  std::string config_digest;
  std::optional<IdDefinition> id_definition;
  /// method -> metric name -> threshold value (nullopt = BelowAll).
  std::map<std::string, std::map<std::string, std::optional<double>>> thresholds;
  /// method -> error message for methods whose cells are absent.
  std::map<std::string, std::string> failures;

  /// Methods that have rows, in first-appearance order.
  std::vector<Method> methods() const;
  const ReportRow* find(Method method, std::string_view dataset_id) const;
};

}  // namespace oodbench

#endif  // OODBENCH_TYPES_HPP_
