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

#include "topicprobe/folds.h"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <unordered_set>

#include "topicprobe/error.h"
#include "topicprobe/random.h"
#include "topicprobe/util.h"

namespace topicprobe {

std::string_view mode_name(Mode mode) {
  return mode == Mode::kIn ? "in" : "cross";
}

Mode parse_mode(std::string_view name) {
  const std::string lower = to_lower(name);
  if (lower == "in" || lower == "in-topic") return Mode::kIn;
  if (lower == "cross" || lower == "cross-topic") return Mode::kCross;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::vector<size_t> Fold::indices(Split split) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == split) out.push_back(i);
  }
  return out;
}

size_t Fold::count(Split split) const {
  return static_cast<size_t>(
      std::count(assignment.begin(), assignment.end(), split));
}

FoldPlan plan_cross(const TaskDataset& dataset, uint64_t seed) {
  const int m = dataset.num_topics();
  if (m < 3) {
    throw DataError("cross-topic plan needs at least 3 topics, found " +
                    std::to_string(m));
  }
  Rng rng(derive_seed(seed, "plan_cross"));
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));

  std::array<std::vector<int>, kNumFolds> test_groups;
  for (int i = 0; i < m; ++i) test_groups[i % kNumFolds].push_back(order[i]);

  FoldPlan plan;
  plan.mode = Mode::kCross;
  plan.seed = seed;
  const std::vector<int> topic_of = dataset.topics();
  for (int k = 0; k < kNumFolds; ++k) {
    std::vector<Split> topic_split(m, Split::kTrain);
    std::vector<int> rest;
    for (int t : order) {
      if (std::find(test_groups[k].begin(), test_groups[k].end(), t) !=
          test_groups[k].end()) {
        topic_split[t] = Split::kTest;
      } else {
        rest.push_back(t);
      }
    }
    // m >= 3 leaves at least two non-test topics, so DEV never empties TRAIN.
    assert(rest.size() >= 2);
    rng.shuffle(std::span<int>(rest));
    topic_split[rest.front()] = Split::kDev;

    Fold& fold = plan.folds[k];
    for (int t = 0; t < m; ++t) {
      fold.topics.emplace(dataset.topic_set()[t], topic_split[t]);
    }
    fold.assignment.resize(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
      fold.assignment[i] = topic_split[topic_of[i]];
    }
  }
  return plan;
}

FoldPlan plan_in(const TaskDataset& dataset, const FoldPlan& cross,
                 uint64_t seed) {
  const size_t n = dataset.size();
  std::array<size_t, kNumFolds> test_size;
  size_t total = 0;
  for (int k = 0; k < kNumFolds; ++k) {
    if (cross.folds[k].assignment.size() != n) {
      throw DataError("cross plan does not match dataset size");
    }
    test_size[k] = cross.folds[k].count(Split::kTest);
    total += test_size[k];
  }
  if (total != n) {
    throw DataError("cross plan TEST splits do not cover the dataset");
  }

  Rng rng(derive_seed(seed, "plan_in"));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  rng.shuffle(std::span<size_t>(order));

  FoldPlan plan;
  plan.mode = Mode::kIn;
  plan.seed = seed;
  size_t begin = 0;
  for (int k = 0; k < kNumFolds; ++k) {
    Fold& fold = plan.folds[k];
    fold.assignment.assign(n, Split::kTrain);
    std::vector<size_t> rest;
    rest.reserve(n - test_size[k]);
    for (size_t j = 0; j < n; ++j) {
      if (j >= begin && j < begin + test_size[k]) {
        fold.assignment[order[j]] = Split::kTest;
      } else {
        rest.push_back(order[j]);
      }
    }
    begin += test_size[k];
    Rng fold_rng(derive_seed(seed, "plan_in_fold", static_cast<uint64_t>(k)));
    fold_rng.shuffle(std::span<size_t>(rest));
    const size_t dev_size = cross.folds[k].count(Split::kDev);
    assert(dev_size <= rest.size());
    for (size_t j = 0; j < dev_size; ++j) fold.assignment[rest[j]] = Split::kDev;
  }
  return plan;
}

void validate_plan(const TaskDataset& dataset, const FoldPlan& plan) {
  const size_t n = dataset.size();
  std::vector<int> tested(n, 0);
  for (const Fold& fold : plan.folds) {
    if (fold.assignment.size() != n) {
      throw DataError("fold assignment size mismatch");
    }
    for (size_t i = 0; i < n; ++i) {
      if (fold.assignment[i] == Split::kTest) ++tested[i];
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (tested[i] != 1) {
      throw DataError("instance '" + dataset.instance(i).instance_id +
                      "' is tested " + std::to_string(tested[i]) + " times");
    }
  }
  if (plan.mode != Mode::kCross) return;
  const std::vector<int> topic_of = dataset.topics();
  for (const Fold& fold : plan.folds) {
    std::vector<int> split_of(dataset.num_topics(), -1);
    for (size_t i = 0; i < n; ++i) {
      const int s = static_cast<int>(fold.assignment[i]);
      int& seen = split_of[topic_of[i]];
      if (seen == -1) {
        seen = s;
      } else if (seen != s) {
        throw DataError("topic '" + dataset.topic_set()[topic_of[i]] +
                        "' appears in two splits of one fold");
      }
    }
  }
}

std::vector<TaggedInstance> tag_seen(const TaskDataset& dataset,
                                     const Fold& fold) {
  std::unordered_set<std::string> train_keys;
  for (size_t i = 0; i < dataset.size(); ++i) {
    if (fold.assignment[i] == Split::kTrain) {
      train_keys.insert(lexical_key(dataset.instance(i), dataset.corpus()));
    }
  }
  std::vector<TaggedInstance> tags;
  for (size_t i = 0; i < dataset.size(); ++i) {
    if (fold.assignment[i] == Split::kTrain) continue;
    const bool seen =
        train_keys.contains(lexical_key(dataset.instance(i), dataset.corpus()));
    tags.push_back({i, seen ? SeenTag::kSeen : SeenTag::kUnseen});
  }
  return tags;
}

VocabShift vocab_shift(const TaskDataset& dataset, const Fold& fold) {
  const std::set<std::string> train =
      vocabulary_of(dataset, fold.indices(Split::kTrain));
  const std::set<std::string> test =
      vocabulary_of(dataset, fold.indices(Split::kTest));
  VocabShift shift;
  std::set_difference(train.begin(), train.end(), test.begin(), test.end(),
                      std::inserter(shift.train_minus_test,
                                    shift.train_minus_test.end()));
  std::set_difference(test.begin(), test.end(), train.begin(), train.end(),
                      std::inserter(shift.test_minus_train,
                                    shift.test_minus_train.end()));
  return shift;
}

nlohmann::ordered_json plan_to_json(const TaskDataset& dataset,
                                    const FoldPlan& plan) {
  nlohmann::ordered_json out;
  out["mode"] = mode_name(plan.mode);
  out["seed"] = plan.seed;
  out["folds"] = nlohmann::ordered_json::array();
  for (const Fold& fold : plan.folds) {
    nlohmann::ordered_json f;
    for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
      auto ids = nlohmann::ordered_json::array();
      for (size_t i : fold.indices(s)) {
        ids.push_back(dataset.instance(i).instance_id);
      }
      f[std::string(split_name(s))] = std::move(ids);
    }
    out["folds"].push_back(std::move(f));
  }
  auto topics = nlohmann::ordered_json::array();
  if (plan.mode == Mode::kCross) {
    for (const Fold& fold : plan.folds) {
      nlohmann::ordered_json t;
      for (const auto& [topic, split] : fold.topics) {
        t[topic] = split_name(split);
      }
      topics.push_back(std::move(t));
    }
  }
  out["topic_assignment"] = std::move(topics);
  return out;
}

FoldPlan plan_from_json(const TaskDataset& dataset,
                        const nlohmann::json& value) {
  FoldPlan plan;
  try {
    plan.mode = parse_mode(value.at("mode").get<std::string>());
    plan.seed = value.at("seed").get<uint64_t>();
    const auto& folds = value.at("folds");
    if (!folds.is_array() || folds.size() != kNumFolds) {
      throw DataError("fold plan must have exactly 3 folds");
    }
    for (int k = 0; k < kNumFolds; ++k) {
      Fold& fold = plan.folds[k];
      fold.assignment.assign(dataset.size(), Split::kTrain);
      std::vector<bool> listed(dataset.size(), false);
      for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
        for (const auto& id : folds[k].at(std::string(split_name(s)))) {
          const size_t i = dataset.index_of(id.get<std::string>());
          if (listed[i]) throw DataError("instance listed twice in a fold");
          listed[i] = true;
          fold.assignment[i] = s;
        }
      }
      if (std::find(listed.begin(), listed.end(), false) != listed.end()) {
        throw DataError("fold does not assign every instance");
      }
      const auto& topics = value.at("topic_assignment");
      if (plan.mode == Mode::kCross && topics.size() == kNumFolds) {
        for (const auto& [topic, split] : topics[k].items()) {
          const std::string name = split.get<std::string>();
          Split parsed = name == "test"  ? Split::kTest
                         : name == "dev" ? Split::kDev
                                         : Split::kTrain;
          fold.topics.emplace(topic, parsed);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fold plan: ") + e.what());
  }
  validate_plan(dataset, plan);
  return plan;
}

std::string plan_hash(const TaskDataset& dataset, const FoldPlan& plan) {
  return sha1_hex(plan_to_json(dataset, plan).dump());
}

}  // namespace topicprobe
