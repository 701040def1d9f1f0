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

#ifndef OODBENCH_CONFIG_HPP_
#define OODBENCH_CONFIG_HPP_

// Evaluation config files are JSON objects with these keys (unknown keys are
// rejected):
//
//   head_path       string    classifier head file
//   train_path      string    ID training pack
//   tests           array     [{"path": ..., "kind": "validation" | ...}]
//   methods         array     method names, default all nine
//   keep_fractions  array     default [0.95, 0.99]
//   mode            string    "human_centric" (default) | "conventional"
//   id_definition   string    "all" (default) | "correct"
//   scorer          object    energy_temperature, react_percentile, knn_k,
//                             vim_dim, dice_sparsity, mahalanobis_shrinkage
//   output_dir      string    report directory
//   workers         integer   thread count (OODBENCH_WORKERS overrides)
//
// Relative paths resolve against the config file's directory.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "oodbench/harness.hpp"

namespace oodbench {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// With `require_inputs` false, head/train/tests may be absent (used by
/// `fit`, which only needs methods and scorer settings).
EvalConfig parse_eval_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                             bool require_inputs = true);
EvalConfig read_eval_config(const std::filesystem::path& path, bool require_inputs = true);

nlohmann::json to_json(const EvalConfig& cfg);
nlohmann::json to_json(const ScorerConfig& cfg);

/// FNV-1a 64 of the canonical config JSON, excluding workers and
/// output_dir (which do not change results). 16 lowercase hex digits.
std::string config_digest(const EvalConfig& cfg);

}  // namespace oodbench

#endif  // OODBENCH_CONFIG_HPP_
