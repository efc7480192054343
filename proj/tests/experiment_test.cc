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

#include <atomic>

#include "test_util.h"
#include "topicprobe/error.h"
#include "topicprobe/experiment.h"
#include "topicprobe/synth.h"
#include "topicprobe/util.h"

namespace topicprobe {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

// A three-topic synthetic experiment with a short training schedule.
ExperimentConfig small_experiment(const TempDir& dir) {
  SynthConfig sc;
  sc.topics = 3;
  sc.sentences_per_topic = 25;
  sc.dim = 40;
  sc.num_classes = 3;
  write_synth(generate(sc), dir.path());
  const std::vector<std::string> overrides = {
      "tasks=[\"pos\",\"stance\"]", "seeds=[0,1]", "train.epochs=2"};
  return load_config(dir / "experiment.json", overrides);
}

TEST_CASE("apply_override sets nested values") {
  nlohmann::json j = {{"train", {{"epochs", 20}}}};
  apply_override(j, "train.epochs=3");
  apply_override(j, "train.dropout=0.5");
  apply_override(j, "out=results/run1");
  apply_override(j, "seeds=[4,5]");
  CHECK(j["train"]["epochs"] == 3);
  CHECK(j["train"]["dropout"] == 0.5);
  CHECK(j["out"] == "results/run1");
  CHECK(j["seeds"] == nlohmann::json::array({4, 5}));
  CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "=1"), ConfigError);
}

TEST_CASE("parse_config resolves paths and rejects unknown keys") {
  const nlohmann::json j = {{"sentences", "s.jsonl"},
                            {"datasets", {{"POS", "pos.jsonl"}}},
                            {"stores", {{"m", "/abs/m.tprb"}}},
                            {"train", {{"epochs", 3}}},
                            {"topicspec", {{"binning", "equal-width"}}}};
  const ExperimentConfig cfg = parse_config(j, "/base");
  CHECK(cfg.sentences == fs::path("/base/s.jsonl"));
  CHECK(cfg.datasets.at("pos") == fs::path("/base/pos.jsonl"));
  CHECK(cfg.stores.at("m") == fs::path("/abs/m.tprb"));
  CHECK(cfg.tasks == std::vector<TaskKind>{TaskKind::kPos});
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.binning == Binning::kEqualWidth);

  const nlohmann::json round = nlohmann::json::parse(to_json(cfg).dump());
  const ExperimentConfig again = parse_config(round, "/elsewhere");
  CHECK(again.datasets == cfg.datasets);
  CHECK(again.binning == cfg.binning);

  nlohmann::json bad = j;
  bad["trian"] = {{"epochs", 3}};
  CHECK_THROWS_AS(parse_config(bad, "/base"), ConfigError);
  bad = j;
  bad["train"]["epochz"] = 3;
  CHECK_THROWS_AS(parse_config(bad, "/base"), ConfigError);
  bad = j;
  bad["seeds"] = "zero";
  CHECK_THROWS_AS(parse_config(bad, "/base"), ConfigError);
  bad = j;
  bad["tasks"] = {"parsing"};
  CHECK_THROWS_AS(parse_config(bad, "/base"), ConfigError);
}

TEST_CASE("load_config applies overrides and validates") {
  TempDir dir;
  const ExperimentConfig cfg = small_experiment(dir);
  CHECK(cfg.seeds == std::vector<uint64_t>{0, 1});
  CHECK(cfg.train.epochs == 2);
  CHECK(cfg.out == dir / "out");
  const std::vector<std::string> bad = {"train.epochs=0"};
  CHECK_THROWS_AS(load_config(dir / "experiment.json", bad),
                  ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json", {}), ConfigError);
}

TEST_CASE("parallel_for runs every index and keeps the error category") {
  for (int jobs : {1, 3}) {
    std::vector<std::atomic<int>> hits(17);
    parallel_for(hits.size(), jobs, [&](size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h == 1);
  }
  try {
    parallel_for(
        8, 2,
        [](size_t i) {
          if (i == 5) throw DataError("bad row");
          if (i == 6) throw NumericError("nan");
        },
        [](size_t i) { return "job " + std::to_string(i); });
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("job 5") != std::string::npos);
    CHECK(std::string(e.what()).find("bad row") != std::string::npos);
  }
}

TEST_CASE("renderers") {
  const std::vector<CsvRow> rows = {
      {"m", "pos", "in", 0, 1, "macro_f1", 0.1}};
  CHECK(render_csv(rows) ==
        "model,task,mode,fold,seed,metric,value\nm,pos,in,0,1,macro_f1,0.1\n");

  const std::vector<RunScore> in = {{"m", "POS", 0.9}, {"m", "POS", 0.8}};
  const std::vector<RunScore> cross = {{"m", "POS", 0.7}};
  const std::vector<std::string> tasks = {"POS"};
  const std::string table = render_gap_table(gap(in, cross), tasks);
  CHECK(table.find("85.0") != std::string::npos);
  CHECK(table.find("70.0") != std::string::npos);
  CHECK(table.find("-15.0") != std::string::npos);

  const std::vector<SeenCell> seen = {
      {"m", "POS", "cross", std::nullopt, 0.5, 0.0}};
  CHECK(render_seen_table(seen).find("50.0") != std::string::npos);
  const std::vector<AmnesicCell> am = {
      {"m", "POS", "in", 0.9, 0.6, 0.88, 7}};
  const std::string amt = render_amnesic_table(am);
  CHECK(amt.find("60.0") != std::string::npos);
  CHECK(amt.find("88.0") != std::string::npos);
  const std::vector<MdlCell> mdl = {{"m", "POS", 3.25, 0.0, true, false}};
  CHECK(render_mdl_table(mdl).find("3.25") != std::string::npos);
  const std::vector<ReprobeCell> re = {{"POS", "cross", 0.5, 0.55}};
  CHECK(render_reprobe_table(re).find("+5.0") != std::string::npos);
}

TEST_CASE("probe run is reproducible and writes one report per fold") {
  TempDir dir;
  ExperimentConfig cfg = small_experiment(dir);
  cfg.jobs = 2;
  const auto summary = cmd_probe(cfg);
  CHECK(summary["runs"].size() == 2 * 2 * 3 * 2);
  CHECK(summary["gap"]["cells"].size() == 2);
  for (const char* mode : {"in", "cross"}) {
    for (int fold = 0; fold < 3; ++fold) {
      const fs::path report = cfg.out / "probe" / "synth" /
                              ("pos_" + std::string(mode) + "_" +
                               std::to_string(fold) + "_0.json");
      REQUIRE(fs::exists(report));
      const auto j = nlohmann::json::parse(read_file(report));
      CHECK(j.contains("plan_hash"));
      CHECK(j.contains("provenance"));
    }
  }
  const std::string first = read_file(cfg.out / "probe.csv");
  cfg.jobs = 1;
  cmd_probe(cfg);
  CHECK(read_file(cfg.out / "probe.csv") == first);

  const std::string report = cmd_report(cfg);
  CHECK(report.find("In-Topic vs Cross-Topic") != std::string::npos);
  CHECK(fs::exists(cfg.out / "report.md"));
}

TEST_CASE("ingest-check and plan summaries") {
  TempDir dir;
  const ExperimentConfig cfg = small_experiment(dir);
  const auto ingest = cmd_ingest_check(cfg);
  CHECK(ingest["sentences"] == 75);
  const auto plan = cmd_plan(cfg);
  CHECK(fs::exists(cfg.out / "plans" / "pos_cross.json"));
  CHECK(fs::exists(cfg.out / "plans" / "stance_in.json"));
  CHECK(plan["tasks"].size() == 2);
}

TEST_CASE("reprobe with an identical store changes nothing") {
  TempDir dir;
  ExperimentConfig cfg = small_experiment(dir);
  cfg.tasks = {TaskKind::kPos};
  cfg.seeds = {0};
  cfg.reprobe_model = "synth";
  cfg.reprobe_finetuned = dir / "copy.tprb";
  fs::copy_file(dir / "store.tprb", cfg.reprobe_finetuned);
  const auto summary = cmd_reprobe(cfg);
  REQUIRE(summary["cells"].size() == 2);
  for (const auto& cell : summary["cells"]) {
    CHECK(cell["delta"].get<double>() == 0.0);
  }
}

TEST_CASE("reprobe rejects a store with different sentences") {
  TempDir dir;
  ExperimentConfig cfg = small_experiment(dir);
  const EmbeddingStore base = open_store(dir / "store.tprb");
  StoreBuilder builder(base.dim());
  for (const auto& e : base.entries()) {
    if (e.sentence_id == "t0-s0") continue;
    builder.add(e.sentence_id, e.token_count, base.matrix(e.sentence_id));
  }
  write_store(std::move(builder).build(), dir / "short.tprb");
  cfg.reprobe_model = "synth";
  cfg.reprobe_finetuned = dir / "short.tprb";
  CHECK_THROWS_AS(cmd_reprobe(cfg), DataError);
  cfg.reprobe_finetuned.clear();
  CHECK_THROWS_AS(cmd_reprobe(cfg), ConfigError);
}

TEST_CASE("missing inputs are data errors") {
  TempDir dir;
  ExperimentConfig cfg = small_experiment(dir);
  cfg.stores["other"] = dir / "absent.tprb";
  CHECK_THROWS_AS(cmd_probe(cfg), DataError);
}

}  // namespace
}  // namespace topicprobe
