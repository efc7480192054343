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

#ifndef TOPICPROBE_METRICS_H_
#define TOPICPROBE_METRICS_H_

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topicprobe/corpus.h"
#include "topicprobe/folds.h"

namespace topicprobe {

struct ClassScores {
  int num_classes = 0;
  size_t count = 0;
  // confusion[gold][pred]
  std::vector<std::vector<int64_t>> confusion;
  std::vector<double> per_class_f1;
  // A class enters the macro mean iff it occurs in gold or in predictions.
  std::vector<bool> included;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

// Per-class F1 = 2TP / (2TP + FP + FN); macro-F1 is the unweighted mean
// over included classes. Throws DataError on length mismatch, empty input or
// class ids outside [0, K).
ClassScores score_predictions(std::span<const int> predicted,
                              std::span<const int> gold, int num_classes);

struct EvalReport {
  std::string model;
  TaskKind task = TaskKind::kPos;
  Mode mode = Mode::kIn;
  int fold = 0;
  uint64_t seed = 0;
  std::vector<std::string> label_names;
  ClassScores scores;
  // Macro-F1 restricted to seen / unseen test instances.
  std::optional<double> seen_f1;
  std::optional<double> unseen_f1;
  size_t seen_count = 0;
  size_t unseen_count = 0;
  double seen_ratio = 0.0;
  int best_epoch = 0;
};

// Scores test predictions and fills the seen/unseen breakdown from `tags`
// (only tags of `test_rows` are used).
EvalReport evaluate(std::span<const int> predicted, std::span<const int> gold,
                    std::span<const size_t> test_rows,
                    std::span<const TaggedInstance> tags, int num_classes);

nlohmann::ordered_json to_json(const EvalReport& report);

// One scalar result of a run, keyed for aggregation.
struct RunScore {
  std::string model;
  std::string task;
  double value = 0.0;
};

struct GapCell {
  std::string model;
  std::string task;
  double in_mean = 0.0;
  double cross_mean = 0.0;
  double delta = 0.0;  // cross - in
  size_t in_runs = 0;
  size_t cross_runs = 0;
};

struct ModelGap {
  std::string model;
  double in_mean = 0.0;     // mean of the model's per-task In means
  double cross_mean = 0.0;
  double delta = 0.0;
};

struct GapReport {
  std::string metric;
  std::vector<GapCell> cells;   // sorted by (model, task)
  std::vector<ModelGap> models; // sorted by model
};

// Means per (model, task) for each setup and their differences. The key sets
// of both inputs must match (DataError otherwise).
GapReport gap(std::span<const RunScore> in_scores,
              std::span<const RunScore> cross_scores,
              std::string metric = "macro_f1");

nlohmann::ordered_json to_json(const GapReport& report);

// Spearman correlation with average ranks for ties. Throws DataError for
// fewer than 3 points or unequal lengths, NumericError for constant ranks.
double rank_corr(std::span<const double> x, std::span<const double> y);

// Average (1-based) ranks, ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace topicprobe

#endif  // TOPICPROBE_METRICS_H_
