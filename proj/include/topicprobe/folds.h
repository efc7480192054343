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

#ifndef TOPICPROBE_FOLDS_H_
#define TOPICPROBE_FOLDS_H_

#include <array>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "topicprobe/corpus.h"

namespace topicprobe {

enum class Mode { kIn, kCross };
std::string_view mode_name(Mode mode);  // "in" / "cross"
Mode parse_mode(std::string_view name);

enum class Split : uint8_t { kTrain, kDev, kTest };
std::string_view split_name(Split split);

inline constexpr int kNumFolds = 3;

struct Fold {
  // One entry per dataset instance, in dataset order.
  std::vector<Split> assignment;
  // Cross plans only: topic -> split.
  std::map<std::string, Split> topics;

  std::vector<size_t> indices(Split split) const;
  size_t count(Split split) const;
};

struct FoldPlan {
  Mode mode = Mode::kIn;
  uint64_t seed = 0;
  std::array<Fold, kNumFolds> folds;
};

// Topic-disjoint plan. Topics are shuffled and dealt round-robin into the
// three TEST groups; of the remaining topics one random topic is DEV and the
// rest TRAIN. Throws DataError for fewer than 3 topics.
FoldPlan plan_cross(const TaskDataset& dataset, uint64_t seed);

// Instance-level plan whose per-fold TRAIN/DEV/TEST sizes equal those of
// `cross`. Every instance is tested exactly once.
FoldPlan plan_in(const TaskDataset& dataset, const FoldPlan& cross,
                 uint64_t seed);

// Throws DataError when the plan violates its mode's invariants.
void validate_plan(const TaskDataset& dataset, const FoldPlan& plan);

enum class SeenTag : uint8_t { kSeen, kUnseen };

struct TaggedInstance {
  size_t index;
  SeenTag tag;
};

// Tags every DEV and TEST instance of `fold`: SEEN iff its lexical key
// occurs among the TRAIN split's keys.
std::vector<TaggedInstance> tag_seen(const TaskDataset& dataset,
                                     const Fold& fold);

struct VocabShift {
  std::set<std::string> train_minus_test;  // Delta Z
  std::set<std::string> test_minus_train;
};

VocabShift vocab_shift(const TaskDataset& dataset, const Fold& fold);

nlohmann::ordered_json plan_to_json(const TaskDataset& dataset,
                                    const FoldPlan& plan);
FoldPlan plan_from_json(const TaskDataset& dataset,
                        const nlohmann::json& value);
// SHA-1 of the canonical JSON rendering.
std::string plan_hash(const TaskDataset& dataset, const FoldPlan& plan);

}  // namespace topicprobe

#endif  // TOPICPROBE_FOLDS_H_
