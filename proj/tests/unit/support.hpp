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

#ifndef OODBENCH_TESTS_SUPPORT_HPP_
#define OODBENCH_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oodbench/types.hpp"

namespace oodbench::testing {

inline ClassifierHead random_head(std::mt19937_64& rng, std::size_t k, std::size_t d) {
  std::normal_distribution<double> g;
  ClassifierHead head;
  head.weight.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  head.bias.resize(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < head.weight.size(); ++i) head.weight.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < head.bias.size(); ++i) head.bias[i] = g(rng);
  head.model_id = "test-model";
  return head;
}

/// Pack whose logits are exactly head(z). Labels are uniform over classes,
/// or -1 for label-shift packs.
inline FeaturePack random_pack(std::mt19937_64& rng, const ClassifierHead& head, std::size_t n,
                               DatasetKind kind = DatasetKind::Validation, std::string id = "pack") {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::int32_t> label(0, static_cast<std::int32_t>(head.num_classes()) - 1);
  FeaturePack pack;
  pack.dataset_id = std::move(id);
  pack.kind = kind;
  pack.model_id = head.model_id;
  pack.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(head.feature_dim()));
  for (Eigen::Index i = 0; i < pack.features.size(); ++i) pack.features.data()[i] = g(rng);
  pack.logits.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(head.num_classes()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = head.apply(pack.feature_row(i));
    for (std::size_t c = 0; c < l.size(); ++c) pack.logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = l[c];
    pack.labels.push_back(kind == DatasetKind::LabelShift ? kNoLabel : label(rng));
  }
  return pack;
}

/// Labels every row with the head's own prediction, so all rows are correct.
inline void label_by_prediction(FeaturePack& pack) {
  for (std::size_t i = 0; i < pack.rows(); ++i) {
    Eigen::Index best;
    pack.logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    pack.labels[i] = static_cast<std::int32_t>(best);
  }
}

inline std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, int distinct_values) {
  std::uniform_int_distribution<int> pick(0, distinct_values - 1);
  std::vector<double> out(n);
  for (auto& s : out) s = static_cast<double>(pick(rng)) * 0.25 - 1.0;
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("oodbench-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace oodbench::testing

#endif  // OODBENCH_TESTS_SUPPORT_HPP_
