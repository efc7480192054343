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

#include "topicprobe/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "topicprobe/error.h"

namespace topicprobe {

ClassScores score_predictions(std::span<const int> predicted,
                              std::span<const int> gold, int num_classes) {
  if (predicted.size() != gold.size()) {
    throw DataError("prediction and gold lengths differ");
  }
  if (gold.empty()) throw DataError("cannot score an empty prediction set");
  if (num_classes < 1) throw DataError("num_classes must be positive");
  ClassScores s;
  s.num_classes = num_classes;
  s.count = gold.size();
  s.confusion.assign(num_classes, std::vector<int64_t>(num_classes, 0));
  int64_t correct = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = predicted[i];
    if (g < 0 || g >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("class id out of range [0, " +
                      std::to_string(num_classes) + ")");
    }
    ++s.confusion[g][p];
    if (g == p) ++correct;
  }
  s.per_class_f1.assign(num_classes, 0.0);
  s.included.assign(num_classes, false);
  double sum = 0.0;
  int included = 0;
  for (int c = 0; c < num_classes; ++c) {
    const int64_t tp = s.confusion[c][c];
    int64_t gold_total = 0;
    int64_t pred_total = 0;
    for (int k = 0; k < num_classes; ++k) {
      gold_total += s.confusion[c][k];
      pred_total += s.confusion[k][c];
    }
    const int64_t fn = gold_total - tp;
    const int64_t fp = pred_total - tp;
    if (gold_total == 0 && pred_total == 0) continue;
    s.included[c] = true;
    s.per_class_f1[c] =
        static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    sum += s.per_class_f1[c];
    ++included;
  }
  s.macro_f1 = sum / included;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  return s;
}

EvalReport evaluate(std::span<const int> predicted, std::span<const int> gold,
                    std::span<const size_t> test_rows,
                    std::span<const TaggedInstance> tags, int num_classes) {
  if (test_rows.size() != gold.size()) {
    throw DataError("evaluate: test rows and gold differ in length");
  }
  EvalReport r;
  r.scores = score_predictions(predicted, gold, num_classes);
  std::map<size_t, SeenTag> tag_of;
  for (const TaggedInstance& t : tags) tag_of.emplace(t.index, t.tag);
  std::vector<int> seen_pred, seen_gold, unseen_pred, unseen_gold;
  for (size_t i = 0; i < test_rows.size(); ++i) {
    auto it = tag_of.find(test_rows[i]);
    if (it == tag_of.end()) continue;
    if (it->second == SeenTag::kSeen) {
      seen_pred.push_back(predicted[i]);
      seen_gold.push_back(gold[i]);
    } else {
      unseen_pred.push_back(predicted[i]);
      unseen_gold.push_back(gold[i]);
    }
  }
  r.seen_count = seen_gold.size();
  r.unseen_count = unseen_gold.size();
  const size_t tagged = r.seen_count + r.unseen_count;
  r.seen_ratio = tagged == 0 ? 0.0
                             : static_cast<double>(r.seen_count) /
                                   static_cast<double>(tagged);
  if (!seen_gold.empty()) {
    r.seen_f1 = score_predictions(seen_pred, seen_gold, num_classes).macro_f1;
  }
  if (!unseen_gold.empty()) {
    r.unseen_f1 =
        score_predictions(unseen_pred, unseen_gold, num_classes).macro_f1;
  }
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json out;
  out["model"] = r.model;
  out["task"] = task_name(r.task);
  out["mode"] = mode_name(r.mode);
  out["fold"] = r.fold;
  out["seed"] = r.seed;
  out["count"] = r.scores.count;
  out["macro_f1"] = r.scores.macro_f1;
  out["accuracy"] = r.scores.accuracy;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (int c = 0; c < r.scores.num_classes; ++c) {
    const std::string name = c < static_cast<int>(r.label_names.size())
                                 ? r.label_names[c]
                                 : std::to_string(c);
    per_class[name] = r.scores.included[c]
                          ? nlohmann::ordered_json(r.scores.per_class_f1[c])
                          : nlohmann::ordered_json(nullptr);
  }
  out["per_class_f1"] = std::move(per_class);
  out["seen_f1"] = r.seen_f1 ? nlohmann::ordered_json(*r.seen_f1)
                             : nlohmann::ordered_json(nullptr);
  out["unseen_f1"] = r.unseen_f1 ? nlohmann::ordered_json(*r.unseen_f1)
                                 : nlohmann::ordered_json(nullptr);
  out["seen_count"] = r.seen_count;
  out["unseen_count"] = r.unseen_count;
  out["seen_ratio"] = r.seen_ratio;
  out["best_epoch"] = r.best_epoch;
  out["labels"] = r.label_names;
  out["confusion"] = r.scores.confusion;
  return out;
}

GapReport gap(std::span<const RunScore> in_scores,
              std::span<const RunScore> cross_scores, std::string metric) {
  using Key = std::pair<std::string, std::string>;
  struct Acc {
    double sum = 0.0;
    size_t n = 0;
  };
  std::map<Key, Acc> in_acc, cross_acc;
  for (const RunScore& s : in_scores) {
    auto& a = in_acc[{s.model, s.task}];
    a.sum += s.value;
    ++a.n;
  }
  for (const RunScore& s : cross_scores) {
    auto& a = cross_acc[{s.model, s.task}];
    a.sum += s.value;
    ++a.n;
  }
  for (const auto& [key, acc] : in_acc) {
    if (!cross_acc.contains(key)) {
      throw DataError("gap: no cross-topic runs for model '" + key.first +
                      "', task '" + key.second + "'");
    }
  }
  for (const auto& [key, acc] : cross_acc) {
    if (!in_acc.contains(key)) {
      throw DataError("gap: no in-topic runs for model '" + key.first +
                      "', task '" + key.second + "'");
    }
  }
  GapReport report;
  report.metric = std::move(metric);
  std::map<std::string, std::vector<const GapCell*>> by_model;
  report.cells.reserve(in_acc.size());
  for (const auto& [key, acc] : in_acc) {
    const Acc& cross = cross_acc.at(key);
    GapCell cell;
    cell.model = key.first;
    cell.task = key.second;
    cell.in_mean = acc.sum / static_cast<double>(acc.n);
    cell.cross_mean = cross.sum / static_cast<double>(cross.n);
    cell.delta = cell.cross_mean - cell.in_mean;
    cell.in_runs = acc.n;
    cell.cross_runs = cross.n;
    report.cells.push_back(std::move(cell));
  }
  for (const GapCell& cell : report.cells) by_model[cell.model].push_back(&cell);
  for (const auto& [model, cells] : by_model) {
    ModelGap g;
    g.model = model;
    for (const GapCell* c : cells) {
      g.in_mean += c->in_mean;
      g.cross_mean += c->cross_mean;
    }
    g.in_mean /= static_cast<double>(cells.size());
    g.cross_mean /= static_cast<double>(cells.size());
    g.delta = g.cross_mean - g.in_mean;
    report.models.push_back(std::move(g));
  }
  return report;
}

nlohmann::ordered_json to_json(const GapReport& report) {
  nlohmann::ordered_json out;
  out["metric"] = report.metric;
  auto cells = nlohmann::ordered_json::array();
  for (const GapCell& c : report.cells) {
    cells.push_back({{"model", c.model},
                     {"task", c.task},
                     {"in", c.in_mean},
                     {"cross", c.cross_mean},
                     {"delta", c.delta},
                     {"in_runs", c.in_runs},
                     {"cross_runs", c.cross_runs}});
  }
  out["cells"] = std::move(cells);
  auto models = nlohmann::ordered_json::array();
  for (const ModelGap& m : report.models) {
    models.push_back({{"model", m.model},
                      {"in", m.in_mean},
                      {"cross", m.cross_mean},
                      {"delta", m.delta}});
  }
  out["models"] = std::move(models);
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double rank_corr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("rank_corr: length mismatch");
  if (x.size() < 3) throw DataError("rank_corr needs at least 3 points");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw NumericError("rank_corr: zero variance in ranks");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace topicprobe
