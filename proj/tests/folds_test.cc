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

#include <doctest.h>

#include <map>
#include <set>

#include "test_util.h"
#include "topicprobe/error.h"
#include "topicprobe/folds.h"

namespace topicprobe {
namespace {

TaskDataset pos_dataset(int topics, int per_topic) {
  auto corpus = testing::small_corpus(topics, per_topic);
  return TaskDataset(TaskKind::kPos, testing::pos_instances(*corpus, 3),
                     corpus);
}

TEST_CASE("cross plan: every topic tested once, splits topic-disjoint") {
  for (int m = 3; m <= 8; ++m) {
    const TaskDataset ds = pos_dataset(m, 4);
    const FoldPlan plan = plan_cross(ds, 7);
    CHECK_NOTHROW(validate_plan(ds, plan));
    std::map<std::string, int> tested;
    for (const Fold& fold : plan.folds) {
      CHECK(fold.topics.size() == static_cast<size_t>(m));
      int dev_topics = 0;
      for (const auto& [topic, split] : fold.topics) {
        if (split == Split::kTest) ++tested[topic];
        if (split == Split::kDev) ++dev_topics;
      }
      CHECK(dev_topics == 1);
      CHECK(fold.count(Split::kTrain) > 0);
      for (size_t i = 0; i < ds.size(); ++i) {
        CHECK(fold.assignment[i] == fold.topics.at(ds.instance(i).topic));
      }
    }
    CHECK(tested.size() == static_cast<size_t>(m));
    for (const auto& [topic, n] : tested) CHECK(n == 1);
  }
}

TEST_CASE("cross plan needs three topics") {
  CHECK_THROWS_AS(plan_cross(pos_dataset(2, 3), 0), DataError);
}

TEST_CASE("in plan mirrors cross sizes and tests every instance once") {
  const TaskDataset ds = pos_dataset(5, 7);
  const FoldPlan cross = plan_cross(ds, 3);
  const FoldPlan in = plan_in(ds, cross, 3);
  CHECK_NOTHROW(validate_plan(ds, in));
  for (int k = 0; k < kNumFolds; ++k) {
    for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
      CHECK(in.folds[k].count(s) == cross.folds[k].count(s));
    }
  }
  // In-topic TEST sets mix topics.
  std::set<std::string> test_topics;
  for (size_t i : in.folds[0].indices(Split::kTest)) {
    test_topics.insert(ds.instance(i).topic);
  }
  CHECK(test_topics.size() > 1);
}

TEST_CASE("plans are seed-deterministic") {
  const TaskDataset ds = pos_dataset(6, 3);
  const FoldPlan a = plan_cross(ds, 11);
  const FoldPlan b = plan_cross(ds, 11);
  CHECK(plan_hash(ds, a) == plan_hash(ds, b));
  CHECK(plan_hash(ds, plan_in(ds, a, 1)) == plan_hash(ds, plan_in(ds, b, 1)));
  bool differs = false;
  for (uint64_t s = 12; s < 20 && !differs; ++s) {
    differs = plan_hash(ds, plan_cross(ds, s)) != plan_hash(ds, a);
  }
  CHECK(differs);
}

TEST_CASE("validate_plan catches leaks and double testing") {
  const TaskDataset ds = pos_dataset(4, 3);
  FoldPlan plan = plan_cross(ds, 0);
  SUBCASE("topic split across TRAIN and TEST") {
    const size_t i = plan.folds[0].indices(Split::kTest).front();
    plan.folds[0].assignment[i] = Split::kTrain;
    plan.folds[1].assignment[i] = Split::kTest;
    CHECK_THROWS_AS(validate_plan(ds, plan), DataError);
  }
  SUBCASE("instance never tested") {
    FoldPlan in = plan_in(ds, plan, 0);
    const size_t i = in.folds[2].indices(Split::kTest).front();
    in.folds[2].assignment[i] = Split::kDev;
    CHECK_THROWS_AS(validate_plan(ds, in), DataError);
  }
}

TEST_CASE("plan JSON round-trip") {
  const TaskDataset ds = pos_dataset(4, 3);
  for (Mode mode : {Mode::kIn, Mode::kCross}) {
    const FoldPlan cross = plan_cross(ds, 5);
    const FoldPlan plan = mode == Mode::kCross ? cross : plan_in(ds, cross, 5);
    const auto js = plan_to_json(ds, plan);
    const FoldPlan back = plan_from_json(ds, nlohmann::json::parse(js.dump()));
    CHECK(back.mode == plan.mode);
    for (int k = 0; k < kNumFolds; ++k) {
      CHECK(back.folds[k].assignment == plan.folds[k].assignment);
      CHECK(back.folds[k].topics == plan.folds[k].topics);
    }
    CHECK(plan_hash(ds, back) == plan_hash(ds, plan));
  }
  CHECK_THROWS_AS(plan_from_json(ds, nlohmann::json::parse("{\"mode\":\"in\"}")),
                  DataError);
  CHECK(parse_mode("Cross") == Mode::kCross);
  CHECK_THROWS_AS(parse_mode("sideways"), ConfigError);
}

TEST_CASE("seen tags match a brute-force scan") {
  const TaskDataset ds = pos_dataset(4, 6);
  const FoldPlan plan = plan_cross(ds, 2);
  for (const Fold& fold : plan.folds) {
    const auto tags = tag_seen(ds, fold);
    CHECK(tags.size() == fold.count(Split::kDev) + fold.count(Split::kTest));
    for (const TaggedInstance& t : tags) {
      bool seen = false;
      for (size_t j : fold.indices(Split::kTrain)) {
        if (lexical_key(ds.instance(j), ds.corpus()) ==
            lexical_key(ds.instance(t.index), ds.corpus())) {
          seen = true;
        }
      }
      CHECK((t.tag == SeenTag::kSeen) == seen);
    }
  }
}

TEST_CASE("vocabulary shift under cross splits") {
  const TaskDataset ds = pos_dataset(4, 5);
  const FoldPlan plan = plan_cross(ds, 0);
  const Fold& fold = plan.folds[0];
  const VocabShift shift = vocab_shift(ds, fold);
  // Topic-exclusive words of the TEST topics never occur in TRAIN.
  for (const auto& [topic, split] : fold.topics) {
    const std::string t = topic.substr(5);
    const std::string word = "t" + t + "w0";
    if (split == Split::kTest) CHECK(shift.test_minus_train.count(word) == 1);
    if (split == Split::kTrain) CHECK(shift.train_minus_test.count(word) == 1);
  }
  CHECK(shift.test_minus_train.count("end") == 0);
}

}  // namespace
}  // namespace topicprobe
