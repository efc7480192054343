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

#ifndef TOPICPROBE_EXPERIMENT_H_
#define TOPICPROBE_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topicprobe/corpus.h"
#include "topicprobe/folds.h"
#include "topicprobe/linprobe.h"
#include "topicprobe/mdl.h"
#include "topicprobe/metrics.h"
#include "topicprobe/synth.h"
#include "topicprobe/topicspec.h"

namespace topicprobe {

struct AmnesicSettings {
  int max_iterations = 20;
  double tolerance = 0.02;
  double dev_fraction = 0.2;
  uint64_t seed = 0;
  // Optional TOPICSPEC instance file; derived from the corpus when empty.
  std::filesystem::path topicspec_dataset;
  size_t max_instances = 40000;
  // Also write the projected stores next to the projection matrices.
  bool materialize = false;
};

struct ExperimentConfig {
  std::filesystem::path sentences;
  std::map<std::string, std::filesystem::path> datasets;  // lower-case task
  std::map<std::string, std::filesystem::path> stores;    // model -> TPRB
  std::vector<TaskKind> tasks;
  std::vector<Mode> modes = {Mode::kIn, Mode::kCross};
  std::vector<uint64_t> seeds = {0, 1, 2};
  uint64_t plan_seed = 0;
  TrainConfig train;
  MdlOptions mdl;
  AmnesicSettings amnesic;
  double topicspec_alpha = 1.0;
  Binning binning = Binning::kEqualFrequency;
  std::filesystem::path out;
  int jobs = 1;
  // Re-probing: baseline model key and the fine-tuned encoder's store.
  std::string reprobe_model;
  std::filesystem::path reprobe_finetuned;

  void validate() const;  // throws ConfigError
};

// Paths are resolved against `base_dir`. Unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& in,
                              const std::filesystem::path& base_dir);
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

// Applies "a.b.c=value" to `config`. The value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_override(nlohmann::json& config, std::string_view assignment);

// Reads a JSON config file and applies overrides in order. When no output
// directory is configured, TOPICPROBE_OUT is used, then "topicprobe_out".
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::span<const std::string> overrides);

// Runs fn(0..n-1) on up to `jobs` threads. The first failure is rethrown
// with the same error category after all workers stop; `describe(i)` names
// the failing job in the message.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn,
                  const std::function<std::string(size_t)>& describe = {});

struct CsvRow {
  std::string model;
  std::string task;
  std::string mode;
  int fold = 0;
  uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

// model,task,mode,fold,seed,metric,value with shortest round-trip numbers.
std::string render_csv(std::span<const CsvRow> rows);
// Rows: models; columns: In/Cross per task, then the averages and delta.
std::string render_gap_table(const GapReport& report,
                             std::span<const std::string> tasks);

struct SeenCell {
  std::string model;
  std::string task;
  std::string mode;
  std::optional<double> seen_f1;
  std::optional<double> unseen_f1;
  double seen_ratio = 0.0;
};
std::string render_seen_table(std::span<const SeenCell> cells);

struct AmnesicCell {
  std::string model;
  std::string task;
  std::string mode;
  double baseline = 0.0;
  double amnesic = 0.0;
  double random = 0.0;
  int removed_rank = 0;
};
std::string render_amnesic_table(std::span<const AmnesicCell> cells);

struct MdlCell {
  std::string model;
  std::string task;
  double in_compression = 0.0;
  double cross_compression = 0.0;
  bool has_in = false;
  bool has_cross = false;
};
std::string render_mdl_table(std::span<const MdlCell> cells);

struct ReprobeCell {
  std::string task;
  std::string mode;
  double pretrained = 0.0;
  double finetuned = 0.0;
};
std::string render_reprobe_table(std::span<const ReprobeCell> cells);

// Subcommands. Each writes its artifacts under cfg.out and returns the
// summary it wrote.
nlohmann::ordered_json cmd_ingest_check(const ExperimentConfig& cfg);
nlohmann::ordered_json cmd_plan(const ExperimentConfig& cfg);
nlohmann::ordered_json cmd_probe(const ExperimentConfig& cfg);
nlohmann::ordered_json cmd_mdl(const ExperimentConfig& cfg);
nlohmann::ordered_json cmd_topicspec(const ExperimentConfig& cfg);
nlohmann::ordered_json cmd_amnesic(const ExperimentConfig& cfg);
nlohmann::ordered_json cmd_reprobe(const ExperimentConfig& cfg);
// Collects the summaries found under cfg.out into report.md.
std::string cmd_report(const ExperimentConfig& cfg);
nlohmann::ordered_json cmd_synth(const SynthConfig& cfg,
                                 const std::filesystem::path& out);

}  // namespace topicprobe

#endif  // TOPICPROBE_EXPERIMENT_H_
