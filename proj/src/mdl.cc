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

#include "topicprobe/mdl.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "topicprobe/error.h"
#include "topicprobe/random.h"

namespace topicprobe {

std::vector<double> mdl_fractions() {
  std::vector<double> out;
  for (int e = 10; e >= 1; --e) out.push_back(std::ldexp(1.0, -e));
  return out;
}

namespace {

constexpr size_t kMinInstances = 2048;

double step_bits(const FeatureMatrix& features, std::span<const int> labels,
                 std::span<const size_t> train_rows,
                 std::span<const size_t> eval_rows, int num_classes,
                 const TrainConfig& cfg) {
  const ProbeData train = make_probe_data(features, labels, train_rows);
  const ProbeData eval = make_probe_data(features, labels, eval_rows);
  TrainConfig step_cfg = cfg;
  step_cfg.select_on_dev = false;
  step_cfg.epochs = std::min(cfg.epochs, kMdlMaxEpochs);
  const TrainResult fit =
      train_probe(train, ProbeData{}, num_classes, step_cfg);
  return codelength_bits(fit.model, eval);
}

}  // namespace

MdlReport mdl_online(const FeatureMatrix& features,
                     std::span<const int> labels, std::span<const int> topics,
                     std::span<const size_t> rows, int num_classes,
                     const TrainConfig& cfg, Mode mode, uint64_t seed,
                     const MdlOptions& options) {
  if (num_classes < 2) throw DataError("MDL needs at least 2 classes");
  MdlReport report;
  report.mode = mode;
  report.num_classes = num_classes;

  std::vector<size_t> train_order;
  std::vector<size_t> eval_order;
  if (mode == Mode::kIn) {
    train_order.assign(rows.begin(), rows.end());
    Rng rng(derive_seed(seed, "mdl_order"));
    rng.shuffle(std::span<size_t>(train_order));
    report.n = train_order.size();
  } else {
    std::map<int, std::vector<size_t>> by_topic;
    for (size_t r : rows) by_topic[topics[r]].push_back(r);
    if (by_topic.size() < 2) {
      throw DataError("cross-topic MDL needs at least 2 topics in the split");
    }
    std::vector<int> topic_order;
    for (const auto& [t, members] : by_topic) topic_order.push_back(t);
    Rng rng(derive_seed(seed, "mdl_topics"));
    rng.shuffle(std::span<int>(topic_order));
    // Greedy balance: each topic goes to the currently smaller group.
    std::vector<size_t> groups[2];
    for (int t : topic_order) {
      auto& target = groups[0].size() <= groups[1].size() ? groups[0] : groups[1];
      const auto& members = by_topic.at(t);
      target.insert(target.end(), members.begin(), members.end());
    }
    Rng order_rng(derive_seed(seed, "mdl_order"));
    order_rng.shuffle(std::span<size_t>(groups[0]));
    order_rng.shuffle(std::span<size_t>(groups[1]));
    const size_t half = std::min(groups[0].size(), groups[1].size());
    train_order = std::move(groups[0]);
    eval_order = std::move(groups[1]);
    report.n = 2 * half;
  }
  if (report.n < kMinInstances) {
    throw DataError("MDL needs at least " + std::to_string(kMinInstances) +
                    " usable instances, found " + std::to_string(report.n));
  }

  const double n = static_cast<double>(report.n);
  report.uniform_bits = n * std::log2(static_cast<double>(num_classes));
  for (double t : mdl_fractions()) {
    const auto size = static_cast<size_t>(std::floor(n * t));
    MdlStep step;
    step.fraction = t;
    step.train_size = size;
    step.eval_size = size;
    const std::span<const size_t> train_rows(train_order.data(), size);
    const std::span<const size_t> eval_rows =
        mode == Mode::kIn ? std::span<const size_t>(train_order.data() + size, size)
                          : std::span<const size_t>(eval_order.data(), size);
    step.bits = step_bits(features, labels, train_rows, eval_rows, num_classes,
                          cfg);
    report.steps.push_back(step);
    report.mdl_bits += step.bits;
  }
  if (options.include_first_block) {
    report.first_block_bits = std::floor(n * mdl_fractions().front()) *
                              std::log2(static_cast<double>(num_classes));
    report.mdl_bits += report.first_block_bits;
  }
  if (!std::isfinite(report.mdl_bits) || report.mdl_bits <= 0.0) {
    throw NumericError("MDL codelength is not a positive finite number");
  }
  report.compression = report.uniform_bits / report.mdl_bits;
  return report;
}

nlohmann::ordered_json to_json(const MdlReport& r) {
  nlohmann::ordered_json out;
  out["mode"] = mode_name(r.mode);
  out["n"] = r.n;
  out["num_classes"] = r.num_classes;
  out["uniform_bits"] = r.uniform_bits;
  out["num_steps"] = r.steps.size();
  auto steps = nlohmann::ordered_json::array();
  for (const MdlStep& s : r.steps) {
    steps.push_back({{"fraction", s.fraction},
                     {"train_size", s.train_size},
                     {"eval_size", s.eval_size},
                     {"bits", s.bits}});
  }
  out["steps"] = std::move(steps);
  out["first_block_bits"] = r.first_block_bits;
  out["mdl_bits"] = r.mdl_bits;
  out["compression"] = r.compression;
  return out;
}

}  // namespace topicprobe
