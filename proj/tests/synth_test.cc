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

#include <set>

#include "test_util.h"
#include "topicprobe/error.h"
#include "topicprobe/linprobe.h"
#include "topicprobe/synth.h"
#include "topicprobe/util.h"

namespace topicprobe {
namespace {

using testing::TempDir;

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.topics = 3;
  cfg.sentences_per_topic = 30;
  cfg.dim = 40;
  cfg.num_classes = 3;
  return cfg;
}

TEST_CASE("config validation") {
  SynthConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.planted_directions() == 3 + 9 + 3 + 1 + 3 + 9);
  cfg.dim = 27;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.topics = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.noise = -1;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  nlohmann::json j = small_config();
  j["bogus"] = 1;
  CHECK_THROWS_AS(j.get<SynthConfig>(), ConfigError);
}

TEST_CASE("config JSON round-trip") {
  SynthConfig cfg = small_config();
  cfg.topic_signal = 1.5;
  cfg.spec_label_coupling = true;
  const nlohmann::json j = cfg;
  const SynthConfig back = j.get<SynthConfig>();
  CHECK(back.topic_signal == 1.5);
  CHECK(back.spec_label_coupling);
  CHECK(back.dim == 40);
}

TEST_CASE("same seed gives a bit-identical store") {
  const SynthData a = generate(small_config());
  const SynthData b = generate(small_config());
  REQUIRE(a.store.bytes().size() == b.store.bytes().size());
  CHECK(std::equal(a.store.bytes().begin(), a.store.bytes().end(),
                   b.store.bytes().begin()));
  SynthConfig other = small_config();
  other.seed = 1;
  const SynthData c = generate(other);
  CHECK(serialize_dataset(c.dataset(TaskKind::kPos)) !=
        serialize_dataset(a.dataset(TaskKind::kPos)));
}

TEST_CASE("signal strengths do not change the sentences") {
  SynthConfig cfg = small_config();
  const SynthData a = generate(cfg);
  cfg.label_signal = 0.0;
  cfg.topic_signal = 2.0;
  cfg.noise = 0.1;
  const SynthData b = generate(cfg);
  CHECK(serialize_dataset(a.dataset(TaskKind::kDep)) ==
        serialize_dataset(b.dataset(TaskKind::kDep)));
  CHECK(a.store.matrix("t0-s0") != b.store.matrix("t0-s0"));
}

TEST_CASE("generated data is structurally valid") {
  const SynthData d = generate(small_config());
  CHECK(d.corpus->size() == 90);
  CHECK(d.corpus->topics().size() == 3);
  CHECK_NOTHROW(check_store_coverage(d.store, *d.corpus));
  size_t tokens = 0;
  for (const Sentence& s : d.corpus->sentences()) {
    CHECK(s.tokens.size() >= 8);
    CHECK(s.tokens.size() <= 14);
    tokens += s.tokens.size();
  }
  CHECK(d.dataset(TaskKind::kPos).size() == tokens);
  CHECK(d.dataset(TaskKind::kStance).size() == 90);
  CHECK(d.dataset(TaskKind::kStance).num_labels() == 3);
  CHECK(d.dataset(TaskKind::kNer).size() > 0);
  CHECK(d.dataset(TaskKind::kDep).size() >= 90);
  CHECK_THROWS_AS(d.dataset(TaskKind::kTopicSpec), DataError);
  const Eigen::MatrixXd gram = d.basis.transpose() * d.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("topic pools are exclusive without leakage") {
  const SynthData d = generate(small_config());
  for (const Sentence& s : d.corpus->sentences()) {
    for (const std::string& tok : s.tokens) {
      if (tok[0] == 't') CHECK(tok.substr(1, 1) == s.topic.substr(5));
    }
  }
  SynthConfig leaky = small_config();
  leaky.leakage = 0.5;
  const SynthData l = generate(leaky);
  bool leaked = false;
  for (const Sentence& s : l.corpus->sentences()) {
    for (const std::string& tok : s.tokens) {
      if (tok[0] == 't' && tok.substr(1, 1) != s.topic.substr(5)) leaked = true;
    }
  }
  CHECK(leaked);
}

TEST_CASE("coupling ties class 0 to topic-exclusive types") {
  SynthConfig cfg = small_config();
  cfg.spec_label_coupling = true;
  const SynthData d = generate(cfg);
  const TaskDataset& pos = d.dataset(TaskKind::kPos);
  for (const Instance& inst : pos.instances()) {
    const std::string& tok =
        d.corpus->at(inst.sentence_id).tokens[inst.positions[0][0]];
    CHECK((inst.label == "C0") == (tok[0] == 't'));
  }
}

TEST_CASE("planted label directions carry the probe weights") {
  SynthConfig cfg = small_config();
  cfg.sentences_per_topic = 80;
  cfg.label_signal = 3.0;
  cfg.topic_offset = 0.0;
  cfg.noise = 0.1;
  const SynthData d = generate(cfg);
  const TaskDataset& pos = d.dataset(TaskKind::kPos);
  const FeatureMatrix f = build_features(d.store, pos);
  std::vector<size_t> rows(pos.size());
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto labels = pos.labels();
  const ProbeData train = make_probe_data(f, labels, rows);
  TrainConfig tc;
  tc.epochs = 5;
  const TrainResult r = train_probe(train, ProbeData{}, pos.num_labels(), tc);
  const Eigen::MatrixXd w = r.model.weights;
  const Eigen::MatrixXd b = d.class_subspace();
  const double fraction = (w * b).norm() / w.norm();
  MESSAGE("planted weight fraction " << fraction);
  CHECK(fraction > 0.9);
}

TEST_CASE("write_synth lays out a runnable experiment") {
  TempDir dir;
  const SynthData d = generate(small_config());
  write_synth(d, dir.path());
  for (const char* f : {"sentences.jsonl", "pos.jsonl", "ner.jsonl",
                        "dep.jsonl", "stance.jsonl", "store.tprb",
                        "synth.json", "experiment.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const Corpus c = load_sentences(dir / "sentences.jsonl");
  CHECK(c.size() == d.corpus->size());
  const auto store = open_store(dir / "store.tprb");
  CHECK(store.dim() == 40);
  const auto exp = nlohmann::json::parse(read_file(dir / "experiment.json"));
  CHECK(exp["datasets"]["pos"] == "pos.jsonl");
}

}  // namespace
}  // namespace topicprobe
