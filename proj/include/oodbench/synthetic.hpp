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

#ifndef OODBENCH_SYNTHETIC_HPP_
#define OODBENCH_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "oodbench/types.hpp"

namespace oodbench::synthetic {

/// Gaussian class-conditional benchmark.
///
/// Class k has mean class_separation on coordinates 2k and 2k + 1 and 0
/// elsewhere; the coordinates from 2 * num_classes on are free. Noise is
/// isotropic with scale `noise`. The head is the least-squares fit of
/// logit_scale * one_hot(y) on [z, 1] over the training rows.
///
/// Each OOD pack is Gaussian around the training mean shifted by ood_shift
/// pooled standard deviations. Pack "ood-a" moves along an alternating-sign
/// unit direction in the free coordinates. Pack "ood-b" splits the shift
/// between that direction and minus the all-ones direction of the class
/// coordinates. All tensors are rounded to float32 so in-memory data equals
/// what the files hold.
struct Spec {
  std::size_t num_classes = 5;
  std::size_t dim = 16;
  std::size_t n_train = 5000;
  std::size_t n_validation = 1000;
  std::size_t n_ood = 1000;
  double class_separation = 10.0;
  double noise = 1.0;
  double ood_shift = 10.0;
  double logit_scale = 10.0;
  std::uint64_t seed = 20240601;
};

struct Benchmark {
  ClassifierHead head;
  FeaturePack train;
  FeaturePack validation;
  std::vector<FeaturePack> ood;  // label-shift packs
  double pooled_sd = 0.0;
};

Benchmark generate(const Spec& spec = {});

/// Standard normal draws from a 64-bit Mersenne Twister via Box-Muller.
/// std::normal_distribution is implementation-defined, which would make
/// committed fixtures differ between standard libraries.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}
  double uniform();  // (0, 1)
  double normal();

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Writes head.oodh, train.oodp, validation.oodp, ood-*.oodp and a
/// human-centric config.json into `dir`.
void write_fixture(const Benchmark& bench, const std::filesystem::path& dir);

}  // namespace oodbench::synthetic

#endif  // OODBENCH_SYNTHETIC_HPP_
