// Copyright 2026 The topicprobe Authors.
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

#ifndef TOPICPROBE_MDL_H_
#define TOPICPROBE_MDL_H_

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "topicprobe/embedstore.h"
#include "topicprobe/folds.h"
#include "topicprobe/linprobe.h"

namespace topicprobe {

inline constexpr int kMdlMaxEpochs = 20;

struct MdlOptions {
  // Adds the uniform code of the first block (n * t_1 * log2 K) to mdl,
  // completing the conventional online codelength. Off by default.
  bool include_first_block = false;
};

struct MdlStep {
  double fraction = 0.0;
  size_t train_size = 0;
  size_t eval_size = 0;
  double bits = 0.0;
};

struct MdlReport {
  Mode mode = Mode::kIn;
  size_t n = 0;
  int num_classes = 0;
  double uniform_bits = 0.0;  // n * log2 K
  std::vector<MdlStep> steps;
  double first_block_bits = 0.0;
  double mdl_bits = 0.0;
  double compression = 0.0;   // uniform_bits / mdl_bits
};

// The ten training fractions 1/1024, 1/512, ..., 1/2.
std::vector<double> mdl_fractions();

// Online codelength over `rows` (a training split). In mode: instances are
// put in a seeded order; step j trains on the first n*t_j and is charged the
// cross-entropy (bits) of the next n*t_j. Cross mode: the split's topics are
// divided into two instance-balanced groups; step j trains on the first
// n*t_j of group one and is charged on the first n*t_j of group two, with
// n = 2 * min(|group one|, |group two|). Probes train for
// min(cfg.epochs, kMdlMaxEpochs) epochs without dev selection.
MdlReport mdl_online(const FeatureMatrix& features,
                     std::span<const int> labels, std::span<const int> topics,
                     std::span<const size_t> rows, int num_classes,
                     const TrainConfig& cfg, Mode mode, uint64_t seed,
                     const MdlOptions& options = {});

nlohmann::ordered_json to_json(const MdlReport& report);

}  // namespace topicprobe

#endif  // TOPICPROBE_MDL_H_
