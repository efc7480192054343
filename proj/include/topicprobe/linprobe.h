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

#ifndef TOPICPROBE_LINPROBE_H_
#define TOPICPROBE_LINPROBE_H_

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "topicprobe/corpus.h"
#include "topicprobe/embedstore.h"

namespace topicprobe {

// Probe optimization settings. Defaults follow the published protocol:
// AdamW, 20 epochs with dev-based epoch selection, batch 64, lr 5e-4,
// dropout 0.2, 10% linear warmup.
struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 5e-4;
  double weight_decay = 0.01;
  // Inverted dropout on the input features during training.
  double dropout = 0.2;
  double warmup_fraction = 0.1;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Keep the epoch with the best dev macro-F1; otherwise the last epoch.
  bool select_on_dev = true;

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& out, const TrainConfig& cfg);
void from_json(const nlohmann::json& in, TrainConfig& cfg);

// Linear classifier scores = W v + b.
struct ProbeModel {
  TaskKind task = TaskKind::kPos;
  Eigen::MatrixXd weights;  // K x D
  Eigen::VectorXd bias;     // K
  std::vector<std::string> label_map;

  int num_classes() const { return static_cast<int>(weights.rows()); }
  int input_dim() const { return static_cast<int>(weights.cols()); }
};

// Rows of a shared feature matrix together with their class ids.
struct ProbeData {
  const FeatureMatrix* features = nullptr;
  std::vector<size_t> rows;
  std::vector<int> labels;

  size_t size() const { return rows.size(); }
};

ProbeData make_probe_data(const FeatureMatrix& features,
                          std::span<const int> all_labels,
                          std::span<const size_t> rows);

struct LossAndGradient {
  double loss = 0.0;  // mean cross-entropy, nats
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};

// Mean softmax cross-entropy of (weights, bias) over the rows of `inputs`.
LossAndGradient softmax_cross_entropy(const Eigen::MatrixXd& weights,
                                      const Eigen::VectorXd& bias,
                                      const Eigen::MatrixXd& inputs,
                                      std::span<const int> labels);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_macro_f1 = 0.0;
};

struct TrainResult {
  ProbeModel model;
  int best_epoch = 0;
  std::vector<EpochStats> history;
};

// Trains a probe from zero-initialized parameters. Deterministic for a
// fixed cfg.seed. Throws DataError on empty/inconsistent input and
// NumericError on a non-finite loss.
TrainResult train_probe(const ProbeData& train, const ProbeData& dev,
                        int num_classes, const TrainConfig& cfg,
                        TaskKind task = TaskKind::kPos,
                        std::vector<std::string> label_map = {});

struct Prediction {
  int label = 0;
  Eigen::VectorXd scores;
};

// Argmax of W v + b; ties go to the smallest class id.
Prediction predict(const ProbeModel& model, std::span<const float> vector);
std::vector<int> predict_all(const ProbeModel& model, const ProbeData& data);

// Summed cross-entropy of the gold labels in bits.
double codelength_bits(const ProbeModel& model, const ProbeData& data);

// PRBM: "PRBM" | u32 version=1 | u32 K | u32 D | K*D f64 (row-major W) |
// K f64 bias | u32 json_length | JSON {"task", "labels"}.
void save_probe(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

}  // namespace topicprobe

#endif  // TOPICPROBE_LINPROBE_H_
