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

#include "topicprobe/experiment.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "topicprobe/amnesic.h"
#include "topicprobe/embedstore.h"
#include "topicprobe/error.h"
#include "topicprobe/random.h"
#include "topicprobe/util.h"

namespace topicprobe {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.empty()) return p;
  return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
}

std::map<std::string, fs::path> path_map(const nlohmann::json& obj,
                                         const fs::path& base,
                                         const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::map<std::string, fs::path> out;
  for (const auto& [key, value] : obj.items()) {
    out[key] = resolve(base, value.get<std::string>());
  }
  return out;
}

std::string lower_task(TaskKind task) { return to_lower(task_name(task)); }

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (modes.empty()) throw ConfigError("modes must not be empty");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(topicspec_alpha > 0.0)) throw ConfigError("topicspec.alpha must be > 0");
  if (amnesic.max_iterations < 0) {
    throw ConfigError("amnesic.max_iterations must be >= 0");
  }
  if (!(amnesic.dev_fraction > 0.0 && amnesic.dev_fraction < 1.0)) {
    throw ConfigError("amnesic.dev_fraction must lie in (0, 1)");
  }
  train.validate();
}

ExperimentConfig parse_config(const nlohmann::json& in,
                              const fs::path& base_dir) {
  ExperimentConfig cfg;
  try {
    check_keys(in,
               {"sentences", "datasets", "stores", "tasks", "modes", "seeds",
                "plan_seed", "train", "mdl", "amnesic", "topicspec", "out",
                "jobs", "reprobe"},
               "config");
    if (in.contains("sentences")) {
      cfg.sentences = resolve(base_dir, in.at("sentences").get<std::string>());
    }
    if (in.contains("datasets")) {
      for (auto& [key, path] : path_map(in.at("datasets"), base_dir, "datasets")) {
        cfg.datasets[lower_task(parse_task(key))] = path;
      }
    }
    if (in.contains("stores")) {
      cfg.stores = path_map(in.at("stores"), base_dir, "stores");
    }
    if (in.contains("tasks")) {
      for (const auto& t : in.at("tasks")) {
        cfg.tasks.push_back(parse_task(t.get<std::string>()));
      }
    } else {
      for (const auto& [key, path] : cfg.datasets) {
        cfg.tasks.push_back(parse_task(key));
      }
    }
    if (in.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : in.at("modes")) {
        cfg.modes.push_back(parse_mode(m.get<std::string>()));
      }
    }
    if (in.contains("seeds")) {
      cfg.seeds = in.at("seeds").get<std::vector<uint64_t>>();
    }
    if (in.contains("plan_seed")) in.at("plan_seed").get_to(cfg.plan_seed);
    if (in.contains("train")) {
      check_keys(in.at("train"),
                 {"epochs", "batch_size", "learning_rate", "weight_decay",
                  "dropout", "warmup_fraction", "seed", "beta1", "beta2",
                  "epsilon", "select_on_dev"},
                 "train");
      in.at("train").get_to(cfg.train);
    }
    if (in.contains("mdl")) {
      const auto& m = in.at("mdl");
      check_keys(m, {"include_first_block"}, "mdl");
      if (m.contains("include_first_block")) {
        m.at("include_first_block").get_to(cfg.mdl.include_first_block);
      }
    }
    if (in.contains("amnesic")) {
      const auto& a = in.at("amnesic");
      check_keys(a,
                 {"max_iterations", "tolerance", "dev_fraction", "seed",
                  "topicspec_dataset", "max_instances", "materialize"},
                 "amnesic");
      auto& s = cfg.amnesic;
      if (a.contains("max_iterations")) a.at("max_iterations").get_to(s.max_iterations);
      if (a.contains("tolerance")) a.at("tolerance").get_to(s.tolerance);
      if (a.contains("dev_fraction")) a.at("dev_fraction").get_to(s.dev_fraction);
      if (a.contains("seed")) a.at("seed").get_to(s.seed);
      if (a.contains("topicspec_dataset")) {
        s.topicspec_dataset =
            resolve(base_dir, a.at("topicspec_dataset").get<std::string>());
      }
      if (a.contains("max_instances")) a.at("max_instances").get_to(s.max_instances);
      if (a.contains("materialize")) a.at("materialize").get_to(s.materialize);
    }
    if (in.contains("topicspec")) {
      const auto& t = in.at("topicspec");
      check_keys(t, {"alpha", "binning"}, "topicspec");
      if (t.contains("alpha")) t.at("alpha").get_to(cfg.topicspec_alpha);
      if (t.contains("binning")) {
        cfg.binning = parse_binning(t.at("binning").get<std::string>());
      }
    }
    if (in.contains("out")) {
      cfg.out = resolve(base_dir, in.at("out").get<std::string>());
    }
    if (in.contains("jobs")) in.at("jobs").get_to(cfg.jobs);
    if (in.contains("reprobe")) {
      const auto& r = in.at("reprobe");
      check_keys(r, {"model", "finetuned"}, "reprobe");
      if (r.contains("model")) r.at("model").get_to(cfg.reprobe_model);
      if (r.contains("finetuned")) {
        cfg.reprobe_finetuned =
            resolve(base_dir, r.at("finetuned").get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ojson to_json(const ExperimentConfig& cfg) {
  ojson out;
  out["sentences"] = cfg.sentences.string();
  out["datasets"] = ojson::object();
  for (const auto& [k, v] : cfg.datasets) out["datasets"][k] = v.string();
  out["stores"] = ojson::object();
  for (const auto& [k, v] : cfg.stores) out["stores"][k] = v.string();
  out["tasks"] = ojson::array();
  for (TaskKind t : cfg.tasks) out["tasks"].push_back(lower_task(t));
  out["modes"] = ojson::array();
  for (Mode m : cfg.modes) out["modes"].push_back(mode_name(m));
  out["seeds"] = cfg.seeds;
  out["plan_seed"] = cfg.plan_seed;
  nlohmann::json train = cfg.train;
  out["train"] = ojson::parse(train.dump());
  out["mdl"] = {{"include_first_block", cfg.mdl.include_first_block}};
  out["amnesic"] = {{"max_iterations", cfg.amnesic.max_iterations},
                    {"tolerance", cfg.amnesic.tolerance},
                    {"dev_fraction", cfg.amnesic.dev_fraction},
                    {"seed", cfg.amnesic.seed},
                    {"topicspec_dataset", cfg.amnesic.topicspec_dataset.string()},
                    {"max_instances", cfg.amnesic.max_instances},
                    {"materialize", cfg.amnesic.materialize}};
  out["topicspec"] = {
      {"alpha", cfg.topicspec_alpha},
      {"binning", cfg.binning == Binning::kEqualFrequency ? "equal-frequency"
                                                          : "equal-width"}};
  out["out"] = cfg.out.string();
  out["jobs"] = cfg.jobs;
  out["reprobe"] = {{"model", cfg.reprobe_model},
                    {"finetuned", cfg.reprobe_finetuned.string()}};
  return out;
}

void apply_override(nlohmann::json& config, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) +
                      "' must look like key=value");
  }
  const std::vector<std::string> keys = split(assignment.substr(0, eq), '.');
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &config;
  for (size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].empty()) {
      throw ConfigError("override '" + std::string(assignment) +
                        "' has an empty key");
    }
    if (node->is_null()) *node = nlohmann::json::object();
    if (!node->is_object()) {
      throw ConfigError("override '" + std::string(assignment) +
                        "' descends into a non-object");
    }
    node = &(*node)[keys[i]];
  }
  *node = std::move(value);
}

ExperimentConfig load_config(const fs::path& path,
                             std::span<const std::string> overrides) {
  nlohmann::json raw;
  fs::path base = fs::current_path();
  if (!path.empty()) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    raw = nlohmann::json::parse(text, nullptr, false);
    if (raw.is_discarded() || !raw.is_object()) {
      throw ConfigError(path.string() + ": not a JSON object");
    }
    base = fs::absolute(path).parent_path();
  } else {
    raw = nlohmann::json::object();
  }
  for (const std::string& o : overrides) apply_override(raw, o);
  ExperimentConfig cfg = parse_config(raw, base);
  if (cfg.out.empty()) {
    const char* env = std::getenv("TOPICPROBE_OUT");
    cfg.out = fs::absolute(env && *env ? fs::path(env) : fs::path("topicprobe_out"));
  }
  cfg.validate();
  return cfg;
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn,
                  const std::function<std::string(size_t)>& describe) {
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  size_t failed_index = n;
  std::exception_ptr error;
  auto worker = [&] {
    while (!failed.load()) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index) {
          failed_index = i;
          error = std::current_exception();
        }
        failed.store(true);
      }
    }
  };
  const size_t threads =
      std::min<size_t>(n, static_cast<size_t>(std::max(jobs, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (!error) return;
  const std::string context =
      describe ? "job " + describe(failed_index) + ": " : std::string();
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const NumericError& e) {
    throw NumericError(context + e.what());
  } catch (const std::exception& e) {
    throw Error(context + e.what());
  }
}

namespace {

// Loaded inputs shared by all subcommands.
struct Inputs {
  const ExperimentConfig& cfg;
  std::shared_ptr<const Corpus> corpus;
  ojson hashes = ojson::object();

  explicit Inputs(const ExperimentConfig& c) : cfg(c) {
    if (cfg.sentences.empty()) throw ConfigError("config has no 'sentences'");
    corpus = std::make_shared<const Corpus>(load_sentences(cfg.sentences));
    hash(cfg.sentences);
  }

  void hash(const fs::path& path) {
    if (!hashes.contains(path.string())) {
      hashes[path.string()] = git_blob_hash(path);
    }
  }

  TaskDataset topicspec_dataset() {
    if (!cfg.amnesic.topicspec_dataset.empty()) {
      hash(cfg.amnesic.topicspec_dataset);
      return load_dataset(cfg.amnesic.topicspec_dataset, TaskKind::kTopicSpec,
                          corpus);
    }
    const TopicOddsTable table = build_counts(*corpus, cfg.topicspec_alpha);
    const auto scores = score_all(table);
    const BinResult bins = bin_tokens(scores, cfg.binning);
    return make_topicspec_dataset(bins, corpus, cfg.amnesic.max_instances,
                                  cfg.amnesic.seed);
  }

  TaskDataset dataset(TaskKind task) {
    const std::string key = lower_task(task);
    auto it = cfg.datasets.find(key);
    if (it == cfg.datasets.end()) {
      if (task == TaskKind::kTopicSpec) return topicspec_dataset();
      throw ConfigError("no dataset configured for task '" + key + "'");
    }
    hash(it->second);
    return load_dataset(it->second, task, corpus);
  }

  EmbeddingStore store(const std::string& model) {
    auto it = cfg.stores.find(model);
    if (it == cfg.stores.end()) {
      throw ConfigError("no store configured for model '" + model + "'");
    }
    return open_checked(it->second);
  }

  EmbeddingStore open_checked(const fs::path& path) {
    EmbeddingStore s = open_store(path);
    check_store_coverage(s, *corpus);
    hash(path);
    return s;
  }

  ojson provenance() const {
    ojson out;
    out["config"] = to_json(cfg);
    out["inputs"] = hashes;
    out["conventions"] = {
        {"lexical_keys", "ascii-lowercase"},
        {"specificity_smoothing_alpha", cfg.topicspec_alpha},
        {"specificity_log", "natural"},
        {"mdl_fractions", mdl_fractions().size()},
        {"mdl_max_epochs", kMdlMaxEpochs}};
    return out;
  }
};

// A dataset with its fold plans and seen/unseen tags.
struct TaskContext {
  TaskKind task;
  std::unique_ptr<TaskDataset> dataset;
  std::vector<int> labels;
  std::vector<int> topics;
  FoldPlan in;
  FoldPlan cross;
  std::string in_hash;
  std::string cross_hash;
  std::array<std::vector<TaggedInstance>, kNumFolds> in_tags;
  std::array<std::vector<TaggedInstance>, kNumFolds> cross_tags;

  const FoldPlan& plan(Mode m) const { return m == Mode::kIn ? in : cross; }
  const std::string& hash(Mode m) const {
    return m == Mode::kIn ? in_hash : cross_hash;
  }
  const std::vector<TaggedInstance>& tags(Mode m, int fold) const {
    return m == Mode::kIn ? in_tags[fold] : cross_tags[fold];
  }
  std::string name() const { return lower_task(task); }
};

TaskContext make_context(Inputs& inputs, TaskKind task) {
  TaskContext tc;
  tc.task = task;
  tc.dataset = std::make_unique<TaskDataset>(inputs.dataset(task));
  tc.labels = tc.dataset->labels();
  tc.topics = tc.dataset->topics();
  const uint64_t seed = inputs.cfg.plan_seed;
  tc.cross = plan_cross(*tc.dataset, seed);
  tc.in = plan_in(*tc.dataset, tc.cross, seed);
  validate_plan(*tc.dataset, tc.cross);
  validate_plan(*tc.dataset, tc.in);
  tc.cross_hash = plan_hash(*tc.dataset, tc.cross);
  tc.in_hash = plan_hash(*tc.dataset, tc.in);
  for (int f = 0; f < kNumFolds; ++f) {
    tc.in_tags[f] = tag_seen(*tc.dataset, tc.in.folds[f]);
    tc.cross_tags[f] = tag_seen(*tc.dataset, tc.cross.folds[f]);
  }
  return tc;
}

struct Job {
  size_t task_index;
  Mode mode;
  int fold;
  uint64_t seed;
  int variant = 0;
};

std::vector<Job> enumerate_jobs(const ExperimentConfig& cfg, size_t tasks,
                                int variants) {
  std::vector<Job> jobs;
  for (size_t t = 0; t < tasks; ++t) {
    for (Mode m : cfg.modes) {
      for (int f = 0; f < kNumFolds; ++f) {
        for (uint64_t s : cfg.seeds) {
          for (int v = 0; v < variants; ++v) jobs.push_back({t, m, f, s, v});
        }
      }
    }
  }
  return jobs;
}

std::string job_file(const TaskContext& tc, const Job& job) {
  return tc.name() + "_" + std::string(mode_name(job.mode)) + "_" +
         std::to_string(job.fold) + "_" + std::to_string(job.seed) + ".json";
}

EvalReport run_probe(const TaskContext& tc, const FeatureMatrix& features,
                     const std::string& model, const Job& job,
                     const TrainConfig& base) {
  const Fold& fold = tc.plan(job.mode).folds[job.fold];
  const auto train_rows = fold.indices(Split::kTrain);
  const auto dev_rows = fold.indices(Split::kDev);
  const auto test_rows = fold.indices(Split::kTest);
  const ProbeData train = make_probe_data(features, tc.labels, train_rows);
  const ProbeData dev = make_probe_data(features, tc.labels, dev_rows);
  const ProbeData test = make_probe_data(features, tc.labels, test_rows);
  TrainConfig cfg = base;
  cfg.seed = job.seed;
  const int k = tc.dataset->num_labels();
  const TrainResult fit =
      train_probe(train, dev, k, cfg, tc.task, tc.dataset->label_set());
  const std::vector<int> predicted = predict_all(fit.model, test);
  EvalReport report = evaluate(predicted, test.labels, test_rows,
                               tc.tags(job.mode, job.fold), k);
  report.model = model;
  report.task = tc.task;
  report.mode = job.mode;
  report.fold = job.fold;
  report.seed = job.seed;
  report.label_names = tc.dataset->label_set();
  report.best_epoch = fit.best_epoch;
  return report;
}

void write_json(const fs::path& path, const ojson& value) {
  write_file_atomic(path, value.dump(2) + "\n");
}

std::string describe_job(const std::string& model,
                         const std::vector<TaskContext>& contexts,
                         const Job& job) {
  return model + "/" + contexts[job.task_index].name() + "/" +
         std::string(mode_name(job.mode)) + "/fold" +
         std::to_string(job.fold) + "/seed" + std::to_string(job.seed);
}

std::vector<TaskContext> make_contexts(Inputs& inputs) {
  if (inputs.cfg.tasks.empty()) throw ConfigError("no tasks configured");
  std::vector<TaskContext> out;
  for (TaskKind t : inputs.cfg.tasks) out.push_back(make_context(inputs, t));
  return out;
}

ojson plan_hashes(const std::vector<TaskContext>& contexts) {
  ojson out = ojson::object();
  for (const auto& tc : contexts) {
    out[tc.name()] = {{"in", tc.in_hash}, {"cross", tc.cross_hash}};
  }
  return out;
}

void append_eval_rows(std::vector<CsvRow>& rows, const EvalReport& r,
                      const std::string& task) {
  const std::string mode(mode_name(r.mode));
  auto add = [&](const char* metric, double value) {
    rows.push_back({r.model, task, mode, r.fold, r.seed, metric, value});
  };
  add("macro_f1", r.scores.macro_f1);
  add("accuracy", r.scores.accuracy);
  if (r.seen_f1) add("seen_f1", *r.seen_f1);
  if (r.unseen_f1) add("unseen_f1", *r.unseen_f1);
  add("seen_ratio", r.seen_ratio);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<std::string> task_names(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (TaskKind t : cfg.tasks) out.emplace_back(task_name(t));
  return out;
}

std::vector<std::string> model_names(const ExperimentConfig& cfg) {
  if (cfg.stores.empty()) throw ConfigError("no stores configured");
  std::vector<std::string> out;
  for (const auto& [model, path] : cfg.stores) out.push_back(model);
  return out;
}

}  // namespace

ojson cmd_ingest_check(const ExperimentConfig& cfg) {
  Inputs inputs(cfg);
  ojson summary;
  summary["sentences"] = inputs.corpus->size();
  summary["topics"] = inputs.corpus->topics();
  ojson tasks = ojson::object();
  for (TaskKind t : cfg.tasks) {
    const TaskDataset ds = inputs.dataset(t);
    std::vector<size_t> counts(ds.num_labels(), 0);
    for (int l : ds.labels()) ++counts[l];
    ojson labels = ojson::object();
    for (int l = 0; l < ds.num_labels(); ++l) labels[ds.label_set()[l]] = counts[l];
    tasks[lower_task(t)] = {{"instances", ds.size()},
                            {"num_labels", ds.num_labels()},
                            {"num_topics", ds.num_topics()},
                            {"labels", labels}};
  }
  summary["tasks"] = tasks;
  ojson stores = ojson::object();
  for (const auto& [model, path] : cfg.stores) {
    const EmbeddingStore s = inputs.open_checked(path);
    ojson entry = {{"dim", s.dim()}, {"sentences", s.size()}};
    if (auto meta = read_store_metadata(path)) {
      entry["metadata"] = ojson::parse(*meta, nullptr, false);
    }
    stores[model] = entry;
  }
  summary["stores"] = stores;
  summary["provenance"] = inputs.provenance();
  write_json(cfg.out / "ingest_check.json", summary);
  return summary;
}

ojson cmd_plan(const ExperimentConfig& cfg) {
  Inputs inputs(cfg);
  const auto contexts = make_contexts(inputs);
  ojson summary;
  ojson tasks = ojson::object();
  for (const TaskContext& tc : contexts) {
    ojson per_mode = ojson::object();
    for (Mode m : {Mode::kIn, Mode::kCross}) {
      const FoldPlan& plan = tc.plan(m);
      ojson plan_json = plan_to_json(*tc.dataset, plan);
      plan_json["hash"] = tc.hash(m);
      write_json(cfg.out / "plans" /
                     (tc.name() + "_" + std::string(mode_name(m)) + ".json"),
                 plan_json);
      ojson folds = ojson::array();
      for (int f = 0; f < kNumFolds; ++f) {
        const Fold& fold = plan.folds[f];
        size_t seen = 0, test = 0;
        std::vector<bool> is_test(tc.dataset->size(), false);
        for (size_t i : fold.indices(Split::kTest)) is_test[i] = true;
        for (const TaggedInstance& t : tc.tags(m, f)) {
          if (!is_test[t.index]) continue;
          ++test;
          seen += t.tag == SeenTag::kSeen;
        }
        const VocabShift shift = vocab_shift(*tc.dataset, fold);
        folds.push_back(
            {{"train", fold.count(Split::kTrain)},
             {"dev", fold.count(Split::kDev)},
             {"test", fold.count(Split::kTest)},
             {"seen_ratio", test ? static_cast<double>(seen) / test : 0.0},
             {"train_minus_test_vocab", shift.train_minus_test.size()},
             {"test_minus_train_vocab", shift.test_minus_train.size()}});
      }
      per_mode[std::string(mode_name(m))] = {{"hash", tc.hash(m)},
                                              {"folds", folds}};
    }
    tasks[tc.name()] = per_mode;
  }
  summary["tasks"] = tasks;
  summary["provenance"] = inputs.provenance();
  write_json(cfg.out / "plan_summary.json", summary);
  return summary;
}

ojson cmd_probe(const ExperimentConfig& cfg) {
  Inputs inputs(cfg);
  const auto models = model_names(cfg);
  const auto contexts = make_contexts(inputs);
  std::vector<EvalReport> all;
  for (const std::string& model : models) {
    const EmbeddingStore store = inputs.store(model);
    std::vector<FeatureMatrix> features;
    for (const auto& tc : contexts) {
      features.push_back(build_features(store, *tc.dataset));
    }
    const auto jobs = enumerate_jobs(cfg, contexts.size(), 1);
    std::vector<EvalReport> reports(jobs.size());
    const ojson provenance = inputs.provenance();
    parallel_for(
        jobs.size(), cfg.jobs,
        [&](size_t i) {
          const Job& job = jobs[i];
          const TaskContext& tc = contexts[job.task_index];
          reports[i] = run_probe(tc, features[job.task_index], model, job,
                                 cfg.train);
          ojson out = to_json(reports[i]);
          out["plan_hash"] = tc.hash(job.mode);
          out["provenance"] = provenance;
          write_json(cfg.out / "probe" / model / job_file(tc, job), out);
        },
        [&](size_t i) { return describe_job(model, contexts, jobs[i]); });
    all.insert(all.end(), reports.begin(), reports.end());
  }

  std::vector<CsvRow> rows;
  std::vector<RunScore> in_scores, cross_scores;
  std::map<std::tuple<std::string, std::string, std::string>,
           std::array<std::vector<double>, 3>>
      seen_acc;
  ojson runs = ojson::array();
  for (const EvalReport& r : all) {
    const std::string task(task_name(r.task));
    append_eval_rows(rows, r, to_lower(task));
    (r.mode == Mode::kIn ? in_scores : cross_scores)
        .push_back({r.model, task, r.scores.macro_f1});
    auto& acc = seen_acc[{r.model, task, std::string(mode_name(r.mode))}];
    if (r.seen_f1) acc[0].push_back(*r.seen_f1);
    if (r.unseen_f1) acc[1].push_back(*r.unseen_f1);
    acc[2].push_back(r.seen_ratio);
    runs.push_back({{"model", r.model},
                    {"task", task},
                    {"mode", mode_name(r.mode)},
                    {"fold", r.fold},
                    {"seed", r.seed},
                    {"macro_f1", r.scores.macro_f1}});
  }
  write_file_atomic(cfg.out / "probe.csv", render_csv(rows));

  std::vector<SeenCell> seen;
  ojson seen_json = ojson::array();
  for (const auto& [key, acc] : seen_acc) {
    SeenCell c{std::get<0>(key), std::get<1>(key), std::get<2>(key),
               std::nullopt, std::nullopt, mean(acc[2])};
    if (!acc[0].empty()) c.seen_f1 = mean(acc[0]);
    if (!acc[1].empty()) c.unseen_f1 = mean(acc[1]);
    seen.push_back(c);
    seen_json.push_back(
        {{"model", c.model},
         {"task", c.task},
         {"mode", c.mode},
         {"seen_f1", c.seen_f1 ? ojson(*c.seen_f1) : ojson(nullptr)},
         {"unseen_f1", c.unseen_f1 ? ojson(*c.unseen_f1) : ojson(nullptr)},
         {"seen_ratio", c.seen_ratio}});
  }

  ojson summary;
  std::string md = "# Probing results\n\n";
  if (!in_scores.empty() && !cross_scores.empty()) {
    const GapReport report = gap(in_scores, cross_scores);
    summary["gap"] = to_json(report);
    md += "## Macro-F1 (%), In-Topic vs Cross-Topic\n\n" +
          render_gap_table(report, task_names(cfg)) + "\n";
  } else {
    summary["gap"] = nullptr;
  }
  md += "## Seen and unseen test instances\n\n" + render_seen_table(seen);
  summary["seen_unseen"] = seen_json;
  summary["runs"] = runs;
  summary["plan_hashes"] = plan_hashes(contexts);
  summary["provenance"] = inputs.provenance();
  write_json(cfg.out / "probe_summary.json", summary);
  write_file_atomic(cfg.out / "probe_summary.md", md);
  return summary;
}

ojson cmd_mdl(const ExperimentConfig& cfg) {
  Inputs inputs(cfg);
  const auto models = model_names(cfg);
  const auto contexts = make_contexts(inputs);
  struct Result {
    std::string model;
    Job job;
    MdlReport report;
  };
  std::vector<Result> all;
  for (const std::string& model : models) {
    const EmbeddingStore store = inputs.store(model);
    std::vector<FeatureMatrix> features;
    for (const auto& tc : contexts) {
      features.push_back(build_features(store, *tc.dataset));
    }
    const auto jobs = enumerate_jobs(cfg, contexts.size(), 1);
    std::vector<MdlReport> reports(jobs.size());
    const ojson provenance = inputs.provenance();
    parallel_for(
        jobs.size(), cfg.jobs,
        [&](size_t i) {
          const Job& job = jobs[i];
          const TaskContext& tc = contexts[job.task_index];
          const auto rows =
              tc.plan(job.mode).folds[job.fold].indices(Split::kTrain);
          reports[i] = mdl_online(features[job.task_index], tc.labels,
                                  tc.topics, rows, tc.dataset->num_labels(),
                                  cfg.train, job.mode, job.seed, cfg.mdl);
          ojson out;
          out["model"] = model;
          out["task"] = task_name(tc.task);
          out["fold"] = job.fold;
          out["seed"] = job.seed;
          for (auto& [k, v] : to_json(reports[i]).items()) out[k] = v;
          out["plan_hash"] = tc.hash(job.mode);
          out["provenance"] = provenance;
          write_json(cfg.out / "mdl" / model / job_file(tc, job), out);
        },
        [&](size_t i) { return describe_job(model, contexts, jobs[i]); });
    for (size_t i = 0; i < jobs.size(); ++i) {
      all.push_back({model, jobs[i], reports[i]});
    }
  }

  std::vector<CsvRow> rows;
  std::map<std::pair<std::string, std::string>, std::array<std::vector<double>, 2>>
      acc;
  for (const Result& r : all) {
    const TaskContext& tc = contexts[r.job.task_index];
    const std::string mode(mode_name(r.job.mode));
    for (auto [metric, value] :
         {std::pair<const char*, double>{"compression", r.report.compression},
          {"mdl_bits", r.report.mdl_bits},
          {"uniform_bits", r.report.uniform_bits}}) {
      rows.push_back({r.model, tc.name(), mode, r.job.fold, r.job.seed, metric,
                      value});
    }
    acc[{r.model, std::string(task_name(tc.task))}]
       [r.job.mode == Mode::kIn ? 0 : 1]
           .push_back(r.report.compression);
  }
  write_file_atomic(cfg.out / "mdl.csv", render_csv(rows));

  std::vector<MdlCell> cells;
  ojson cells_json = ojson::array();
  for (const auto& [key, v] : acc) {
    MdlCell c{key.first, key.second, mean(v[0]), mean(v[1]), !v[0].empty(),
              !v[1].empty()};
    cells.push_back(c);
    ojson j = {{"model", c.model}, {"task", c.task}};
    j["in_compression"] = c.has_in ? ojson(c.in_compression) : ojson(nullptr);
    j["cross_compression"] =
        c.has_cross ? ojson(c.cross_compression) : ojson(nullptr);
    j["delta_compression"] = c.has_in && c.has_cross
                                 ? ojson(c.cross_compression - c.in_compression)
                                 : ojson(nullptr);
    cells_json.push_back(j);
  }

  // Rank correlation between probe F1 and compression over matching
  // (model, task, mode) cells, when a probe summary is available.
  ojson rho = nullptr;
  const fs::path probe_summary = cfg.out / "probe_summary.json";
  if (fs::exists(probe_summary)) {
    const auto probe = nlohmann::json::parse(read_file(probe_summary));
    std::map<std::tuple<std::string, std::string, std::string>,
             std::vector<double>>
        f1;
    for (const auto& r : probe.at("runs")) {
      f1[{r.at("model").get<std::string>(), r.at("task").get<std::string>(),
          r.at("mode").get<std::string>()}]
          .push_back(r.at("macro_f1").get<double>());
    }
    std::vector<double> xs, ys;
    for (const MdlCell& c : cells) {
      for (int m = 0; m < 2; ++m) {
        if (!(m == 0 ? c.has_in : c.has_cross)) continue;
        auto it = f1.find({c.model, c.task, m == 0 ? "in" : "cross"});
        if (it == f1.end()) continue;
        xs.push_back(mean(it->second));
        ys.push_back(m == 0 ? c.in_compression : c.cross_compression);
      }
    }
    if (xs.size() >= 3) {
      try {
        rho = rank_corr(xs, ys);
      } catch (const NumericError&) {
        rho = nullptr;
      }
    }
  }

  ojson summary;
  summary["cells"] = cells_json;
  summary["rho"] = rho;
  summary["plan_hashes"] = plan_hashes(contexts);
  summary["provenance"] = inputs.provenance();
  write_json(cfg.out / "mdl_summary.json", summary);
  std::string md = "# Information compression\n\n" + render_mdl_table(cells);
  md += "\nSpearman rho(F1, I): " +
        (rho.is_null() ? std::string("n/a")
                       : format_fixed(rho.get<double>(), 3)) +
        "\n";
  write_file_atomic(cfg.out / "mdl_summary.md", md);
  return summary;
}

ojson cmd_topicspec(const ExperimentConfig& cfg) {
  Inputs inputs(cfg);
  const TopicOddsTable table = build_counts(*inputs.corpus, cfg.topicspec_alpha);
  const auto scores = score_all(table);
  const BinResult bins = bin_tokens(scores, cfg.binning);
  const TaskDataset dataset = make_topicspec_dataset(
      bins, inputs.corpus, cfg.amnesic.max_instances, cfg.amnesic.seed);
  write_file_atomic(cfg.out / "topicspec" / "scores.csv",
                    scores_csv(scores, bins));
  save_dataset(dataset, cfg.out / "topicspec" / "topicspec.jsonl");
  std::array<size_t, 3> type_counts{};
  for (const TokenBin& b : bins.bins) ++type_counts[static_cast<int>(b.bin)];
  std::vector<size_t> instance_counts(dataset.num_labels(), 0);
  for (int l : dataset.labels()) ++instance_counts[l];
  ojson summary;
  summary["types"] = scores.size();
  summary["instances"] = dataset.size();
  summary["degenerate"] = bins.degenerate;
  summary["alpha"] = cfg.topicspec_alpha;
  summary["log"] = "natural";
  summary["type_bins"] = {{"low", type_counts[0]},
                          {"medium", type_counts[1]},
                          {"high", type_counts[2]}};
  ojson inst = ojson::object();
  for (int l = 0; l < dataset.num_labels(); ++l) {
    inst[dataset.label_set()[l]] = instance_counts[l];
  }
  summary["instance_bins"] = inst;
  summary["provenance"] = inputs.provenance();
  write_json(cfg.out / "topicspec" / "summary.json", summary);
  return summary;
}

ojson cmd_amnesic(const ExperimentConfig& cfg) {
  Inputs inputs(cfg);
  const auto models = model_names(cfg);
  const auto contexts = make_contexts(inputs);
  const TaskDataset topicspec = inputs.topicspec_dataset();
  static const char* const kVariants[3] = {"baseline", "amnesic", "random"};

  std::vector<AmnesicCell> cells;
  ojson removal = ojson::object();
  std::vector<CsvRow> rows;
  for (const std::string& model : models) {
    const EmbeddingStore store = inputs.store(model);
    AmnesicConfig acfg;
    acfg.probe = cfg.train;
    acfg.max_iterations = cfg.amnesic.max_iterations;
    acfg.tolerance = cfg.amnesic.tolerance;
    acfg.dev_fraction = cfg.amnesic.dev_fraction;
    acfg.seed = cfg.amnesic.seed;
    const AmnesicResult result = amnesic_remove(store, topicspec, acfg);
    const ProjectionMatrix control = random_remove(
        store, result.projection.removed_rank,
        derive_seed(cfg.amnesic.seed, "random_control"));
    const fs::path dir = cfg.out / "amnesic" / model;
    save_projection(result.projection, dir / "topic.prjm");
    save_projection(control, dir / "random.prjm");
    const std::array<EmbeddingStore, 3> variants = {
        store, project_store(store, result.projection),
        project_store(store, control)};
    if (cfg.amnesic.materialize) {
      write_store(variants[1], dir / "amnesic.tprb");
      write_store(variants[2], dir / "random.tprb");
    }
    ojson trace = ojson::array();
    for (const auto& it : result.trace) {
      trace.push_back({{"dev_accuracy", it.dev_accuracy},
                       {"removed_rank", it.removed_rank}});
    }
    removal[model] = {{"majority_baseline", result.majority_baseline},
                      {"final_accuracy", result.final_accuracy},
                      {"converged", result.converged},
                      {"removed_rank", result.projection.removed_rank},
                      {"iterations", result.projection.iterations},
                      {"trace", trace}};

    std::vector<std::array<FeatureMatrix, 3>> features;
    for (const auto& tc : contexts) {
      std::array<FeatureMatrix, 3> f;
      for (int v = 0; v < 3; ++v) f[v] = build_features(variants[v], *tc.dataset);
      features.push_back(std::move(f));
    }
    const auto jobs = enumerate_jobs(cfg, contexts.size(), 3);
    std::vector<EvalReport> reports(jobs.size());
    const ojson provenance = inputs.provenance();
    parallel_for(
        jobs.size(), cfg.jobs,
        [&](size_t i) {
          const Job& job = jobs[i];
          const TaskContext& tc = contexts[job.task_index];
          reports[i] = run_probe(tc, features[job.task_index][job.variant],
                                 model, job, cfg.train);
          ojson out = to_json(reports[i]);
          out["variant"] = kVariants[job.variant];
          out["plan_hash"] = tc.hash(job.mode);
          out["provenance"] = provenance;
          write_json(dir / kVariants[job.variant] / job_file(tc, job), out);
        },
        [&](size_t i) {
          return describe_job(model, contexts, jobs[i]) + "/" +
                 kVariants[jobs[i].variant];
        });

    std::map<std::pair<size_t, Mode>, std::array<std::vector<double>, 3>> acc;
    for (size_t i = 0; i < jobs.size(); ++i) {
      const Job& job = jobs[i];
      acc[{job.task_index, job.mode}][job.variant].push_back(
          reports[i].scores.macro_f1);
      rows.push_back({model, contexts[job.task_index].name(),
                      std::string(mode_name(job.mode)), job.fold, job.seed,
                      std::string(kVariants[job.variant]) + "_macro_f1",
                      reports[i].scores.macro_f1});
    }
    for (const auto& [key, v] : acc) {
      cells.push_back({model, std::string(task_name(contexts[key.first].task)),
                       std::string(mode_name(key.second)), mean(v[0]),
                       mean(v[1]), mean(v[2]), result.projection.removed_rank});
    }
  }
  write_file_atomic(cfg.out / "amnesic.csv", render_csv(rows));
  ojson cells_json = ojson::array();
  for (const AmnesicCell& c : cells) {
    cells_json.push_back({{"model", c.model},
                          {"task", c.task},
                          {"mode", c.mode},
                          {"baseline", c.baseline},
                          {"amnesic", c.amnesic},
                          {"random", c.random},
                          {"delta", c.amnesic - c.baseline},
                          {"delta_random", c.random - c.baseline},
                          {"removed_rank", c.removed_rank}});
  }
  ojson summary;
  summary["removal"] = removal;
  summary["cells"] = cells_json;
  summary["topicspec_instances"] = topicspec.size();
  summary["plan_hashes"] = plan_hashes(contexts);
  summary["provenance"] = inputs.provenance();
  write_json(cfg.out / "amnesic_summary.json", summary);
  write_file_atomic(cfg.out / "amnesic_summary.md",
                    "# Topic removal\n\n" + render_amnesic_table(cells));
  return summary;
}

ojson cmd_reprobe(const ExperimentConfig& cfg) {
  if (cfg.reprobe_model.empty() || cfg.reprobe_finetuned.empty()) {
    throw ConfigError("reprobe needs reprobe.model and reprobe.finetuned");
  }
  Inputs inputs(cfg);
  const auto contexts = make_contexts(inputs);
  const EmbeddingStore base = inputs.store(cfg.reprobe_model);
  const EmbeddingStore tuned = inputs.open_checked(cfg.reprobe_finetuned);
  if (base.size() != tuned.size()) {
    throw DataError("fine-tuned store has " + std::to_string(tuned.size()) +
                    " sentences, baseline has " + std::to_string(base.size()));
  }
  for (const auto& e : base.entries()) {
    const auto* other = tuned.find(e.sentence_id);
    if (!other) {
      throw DataError("sentence '" + e.sentence_id +
                      "' missing from the fine-tuned store");
    }
    if (other->token_count != e.token_count) {
      throw DataError("sentence '" + e.sentence_id +
                      "' has a different token count in the fine-tuned store");
    }
  }
  static const char* const kVariants[2] = {"pretrained", "finetuned"};
  std::vector<std::array<FeatureMatrix, 2>> features;
  for (const auto& tc : contexts) {
    features.push_back({build_features(base, *tc.dataset),
                        build_features(tuned, *tc.dataset)});
  }
  const auto jobs = enumerate_jobs(cfg, contexts.size(), 2);
  std::vector<EvalReport> reports(jobs.size());
  const ojson provenance = inputs.provenance();
  const fs::path dir = cfg.out / "reprobe" / cfg.reprobe_model;
  parallel_for(
      jobs.size(), cfg.jobs,
      [&](size_t i) {
        const Job& job = jobs[i];
        const TaskContext& tc = contexts[job.task_index];
        reports[i] = run_probe(tc, features[job.task_index][job.variant],
                               cfg.reprobe_model, job, cfg.train);
        ojson out = to_json(reports[i]);
        out["variant"] = kVariants[job.variant];
        out["plan_hash"] = tc.hash(job.mode);
        out["provenance"] = provenance;
        write_json(dir / kVariants[job.variant] / job_file(tc, job), out);
      },
      [&](size_t i) {
        return describe_job(cfg.reprobe_model, contexts, jobs[i]) + "/" +
               kVariants[jobs[i].variant];
      });

  std::map<std::pair<size_t, Mode>, std::array<std::vector<double>, 2>> acc;
  std::vector<CsvRow> rows;
  for (size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    acc[{job.task_index, job.mode}][job.variant].push_back(
        reports[i].scores.macro_f1);
    rows.push_back({cfg.reprobe_model, contexts[job.task_index].name(),
                    std::string(mode_name(job.mode)), job.fold, job.seed,
                    std::string(kVariants[job.variant]) + "_macro_f1",
                    reports[i].scores.macro_f1});
  }
  write_file_atomic(cfg.out / "reprobe.csv", render_csv(rows));
  std::vector<ReprobeCell> cells;
  ojson cells_json = ojson::array();
  for (const auto& [key, v] : acc) {
    ReprobeCell c{std::string(task_name(contexts[key.first].task)),
                  std::string(mode_name(key.second)), mean(v[0]), mean(v[1])};
    cells.push_back(c);
    cells_json.push_back({{"task", c.task},
                          {"mode", c.mode},
                          {"pretrained", c.pretrained},
                          {"finetuned", c.finetuned},
                          {"delta", c.finetuned - c.pretrained}});
  }
  ojson summary;
  summary["model"] = cfg.reprobe_model;
  summary["cells"] = cells_json;
  summary["plan_hashes"] = plan_hashes(contexts);
  summary["provenance"] = inputs.provenance();
  write_json(cfg.out / "reprobe_summary.json", summary);
  write_file_atomic(cfg.out / "reprobe_summary.md",
                    "# Re-probing a fine-tuned encoder (" + cfg.reprobe_model +
                        ")\n\n" + render_reprobe_table(cells));
  return summary;
}

std::string cmd_report(const ExperimentConfig& cfg) {
  std::string md;
  for (const char* name : {"probe_summary.md", "mdl_summary.md",
                           "amnesic_summary.md", "reprobe_summary.md"}) {
    const fs::path path = cfg.out / name;
    if (!fs::exists(path)) continue;
    if (!md.empty()) md += "\n";
    md += read_file(path);
  }
  if (md.empty()) {
    throw DataError("no summaries found under " + cfg.out.string() +
                    "; run probe, mdl, amnesic or reprobe first");
  }
  write_file_atomic(cfg.out / "report.md", md);
  return md;
}

ojson cmd_synth(const SynthConfig& cfg, const fs::path& out) {
  const SynthData data = generate(cfg);
  write_synth(data, out);
  ojson summary;
  summary["sentences"] = data.corpus->size();
  summary["dim"] = data.store.dim();
  summary["planted_directions"] = cfg.planted_directions();
  ojson tasks = ojson::object();
  for (const auto& [task, ds] : data.datasets) {
    tasks[lower_task(task)] = {{"instances", ds.size()},
                               {"num_labels", ds.num_labels()}};
  }
  summary["tasks"] = tasks;
  summary["experiment"] = (out / "experiment.json").string();
  return summary;
}

}  // namespace topicprobe
