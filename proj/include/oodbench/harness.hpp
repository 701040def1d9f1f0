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

#ifndef OODBENCH_HARNESS_HPP_
#define OODBENCH_HARNESS_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oodbench/scorers.hpp"
#include "oodbench/types.hpp"

namespace oodbench {

struct TestPackSpec {
  std::string path;
  DatasetKind kind = DatasetKind::Validation;
};

struct EvalConfig {
  std::string head_path;
  std::string train_path;
  std::vector<TestPackSpec> tests;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  std::vector<double> keep_fractions{0.95, 0.99};
  EvalMode mode = EvalMode::HumanCentric;
  IdDefinition id_definition = IdDefinition::AllValidation;
  ScorerConfig scorer;
  std::string output_dir;
  int workers = 1;

  /// Relative paths are resolved against this directory.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
  /// Throws std::invalid_argument on the first broken invariant.
  void validate() const;
};

/// Pack data failed validation; `violations` lists every problem found.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string what, std::vector<std::string> violations)
      : std::runtime_error(std::move(what)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct EvalInputs {
  ClassifierHead head;
  FeaturePack train;
  std::vector<FeaturePack> tests;
};

/// Reads head and packs named by `cfg` and validates each against the head.
/// Throws ValidationError, or io::FormatError for unreadable files.
EvalInputs load_inputs(const EvalConfig& cfg);

/// Scores for one method on every dataset. Train scores cover only the
/// correctly classified training rows, in row order.
struct MethodScores {
  std::vector<double> train;
  std::map<std::string, std::vector<double>> tests;  // by dataset_id
};

struct ScoreTable {
  std::map<Method, MethodScores> scores;
  std::map<Method, std::string> failures;
};

/// Fits every configured method on the correctly classified training rows
/// and scores the training rows plus every test pack. Work runs as
/// (method, dataset) units on `workers` threads; output does not depend on
/// the worker count.
ScoreTable compute_scores(const EvalInputs& inputs, const EvalConfig& cfg, int workers);

/// Name of the score file for one (method, dataset) pair inside a scores
/// directory: "<method>__<dataset_id>.scores".
std::string score_file_name(Method method, const std::string& dataset_id);

/// Builds a ScoreTable from score files written by `oodbench score`. The
/// training file must cover all rows of the training pack; correct rows are
/// selected here. Missing files mark the method as failed.
ScoreTable load_score_table(const std::filesystem::path& dir, const EvalInputs& inputs,
                            const EvalConfig& cfg);

/// Thresholds from the correct-train scores, DER per test pack, Average row.
EvalReport evaluate_human_centric(const ScoreTable& table, const EvalInputs& inputs,
                                  const EvalConfig& cfg);

/// FPR95 / AUROC of the validation pack against every label-shift pack.
EvalReport evaluate_conventional(const ScoreTable& table, const EvalInputs& inputs,
                                 const EvalConfig& cfg);

/// Appends one "Average" row per method: the unweighted mean of each metric
/// over that method's dataset rows.
std::vector<ReportRow> aggregate(std::span<const ReportRow> rows);

/// Full pipelines: load, fit, score, evaluate.
EvalReport run_human_centric(const EvalConfig& cfg);
EvalReport run_conventional(const EvalConfig& cfg);

/// Dispatches on cfg.mode. With `scores_dir`, scores are read from files
/// instead of being computed.
EvalReport run_evaluation(const EvalConfig& cfg,
                          const std::optional<std::filesystem::path>& scores_dir = std::nullopt);

/// Metric name for a keep fraction, e.g. 0.95 -> "DER95".
std::string der_metric_name(double keep_fraction);

}  // namespace oodbench

#endif  // OODBENCH_HARNESS_HPP_
