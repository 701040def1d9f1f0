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

#include "oodbench/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace oodbench {

namespace {

struct MethodNames {
  Method method;
  std::string_view name;
  std::string_view display;
};

constexpr std::array<MethodNames, 9> kMethodNames = {{
    {Method::Msp, "msp", "MSP"},
    {Method::Mahalanobis, "mahalanobis", "Mahalanobis"},
    {Method::KlMatching, "kl_matching", "KL-Matching"},
    {Method::Energy, "energy", "Energy"},
    {Method::React, "react", "ReAct"},
    {Method::GradNorm, "gradnorm", "GradNorm"},
    {Method::Knn, "knn", "KNN"},
    {Method::Vim, "vim", "ViM"},
    {Method::Dice, "dice", "DICE"},
}};

constexpr std::array<std::pair<DatasetKind, std::string_view>, 4> kKindNames = {{
    {DatasetKind::IdTrain, "id_train"},
    {DatasetKind::Validation, "validation"},
    {DatasetKind::InputShift, "input_shift"},
    {DatasetKind::LabelShift, "label_shift"},
}};

}  // namespace

std::string_view to_string(DatasetKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<DatasetKind> parse_dataset_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Method method) {
  for (const auto& m : kMethodNames) {
    if (m.method == method) return m.name;
  }
  return "unknown";
}

std::string_view display_name(Method method) {
  for (const auto& m : kMethodNames) {
    if (m.method == method) return m.display;
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& m : kMethodNames) {
    if (m.name == name || m.display == name) return m.method;
  }
  return std::nullopt;
}

std::string_view to_string(EvalMode mode) {
  return mode == EvalMode::HumanCentric ? "human_centric" : "conventional";
}

std::string_view to_string(IdDefinition def) {
  return def == IdDefinition::AllValidation ? "all" : "correct";
}

std::optional<EvalMode> parse_eval_mode(std::string_view name) {
  if (name == "human_centric" || name == "human-centric") return EvalMode::HumanCentric;
  if (name == "conventional") return EvalMode::Conventional;
  return std::nullopt;
}

std::optional<IdDefinition> parse_id_definition(std::string_view name) {
  if (name == "all" || name == "all_validation") return IdDefinition::AllValidation;
  if (name == "correct" || name == "correct_only") return IdDefinition::CorrectOnly;
  return std::nullopt;
}

FeaturePack FeaturePack::select_rows(std::span<const std::size_t> rows) const {
  FeaturePack out;
  out.dataset_id = dataset_id;
  out.kind = kind;
  out.model_id = model_id;
  out.created_utc = created_utc;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.features.resize(n, features.cols());
  out.logits.resize(n, logits.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= this->rows()) throw std::out_of_range("select_rows: row index out of range");
    const auto src = static_cast<Eigen::Index>(rows[i]);
    const auto dst = static_cast<Eigen::Index>(i);
    out.features.row(dst) = features.row(src);
    out.logits.row(dst) = logits.row(src);
    out.labels[i] = labels[rows[i]];
  }
  return out;
}

std::vector<double> ClassifierHead::apply(std::span<const double> z) const {
  const std::size_t k = num_classes();
  const std::size_t d = feature_dim();
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double* w = weight.data() + c * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += w[j] * z[j];
    out[c] = acc + bias[static_cast<Eigen::Index>(c)];
  }
  return out;
}

std::size_t CorrectnessVector::count_correct() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

std::vector<std::size_t> CorrectnessVector::correct_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0) rows.push_back(i);
  }
  return rows;
}

std::vector<Method> EvalReport::methods() const {
  std::vector<Method> out;
  for (const auto& row : rows) {
    if (std::find(out.begin(), out.end(), row.method) == out.end()) out.push_back(row.method);
  }
  return out;
}

const ReportRow* EvalReport::find(Method method, std::string_view dataset_id) const {
  for (const auto& row : rows) {
    if (row.method == method && row.dataset_id == dataset_id) return &row;
  }
  return nullptr;
}

}  // namespace oodbench
