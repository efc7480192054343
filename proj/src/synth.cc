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

#include "topicprobe/synth.h"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <string>

#include "topicprobe/error.h"
#include "topicprobe/random.h"
#include "topicprobe/util.h"

namespace topicprobe {

namespace {

constexpr int kStances = 3;
const char* const kStanceLabels[kStances] = {"pro", "con", "neutral"};

}  // namespace

int SynthConfig::planted_directions() const {
  const int k = num_classes;
  const int m = topics;
  return k + m * k + m + 1 + kStances + kStances * m;
}

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("synth: " + what);
  };
  require(topics >= 2, "topics must be >= 2");
  require(shared_vocab >= 1, "shared_vocab must be >= 1");
  require(topic_vocab >= 1, "topic_vocab must be >= 1");
  require(sentences_per_topic >= 1, "sentences_per_topic must be >= 1");
  require(min_length >= 2 && max_length >= min_length,
          "need 2 <= min_length <= max_length");
  require(exclusive_rate >= 0.0 && exclusive_rate <= 1.0,
          "exclusive_rate must lie in [0, 1]");
  require(leakage >= 0.0 && leakage <= 1.0, "leakage must lie in [0, 1]");
  require(zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
  require(num_classes >= 2, "num_classes must be >= 2");
  require(label_signal >= 0.0 && topic_signal >= 0.0 && topic_offset >= 0.0 &&
              spec_signal >= 0.0 && lexical_signal >= 0.0 && noise >= 0.0,
          "signal strengths must be >= 0");
  require(dim >= 1, "dim must be >= 1");
  if (planted_directions() > dim) {
    throw ConfigError("synth: dim " + std::to_string(dim) + " too small for " +
                      std::to_string(planted_directions()) +
                      " orthogonal planted directions");
  }
}

void to_json(nlohmann::json& out, const SynthConfig& c) {
  out = nlohmann::json{{"topics", c.topics},
                       {"shared_vocab", c.shared_vocab},
                       {"topic_vocab", c.topic_vocab},
                       {"sentences_per_topic", c.sentences_per_topic},
                       {"min_length", c.min_length},
                       {"max_length", c.max_length},
                       {"exclusive_rate", c.exclusive_rate},
                       {"leakage", c.leakage},
                       {"zipf_exponent", c.zipf_exponent},
                       {"dim", c.dim},
                       {"num_classes", c.num_classes},
                       {"label_signal", c.label_signal},
                       {"topic_signal", c.topic_signal},
                       {"topic_offset", c.topic_offset},
                       {"spec_signal", c.spec_signal},
                       {"lexical_signal", c.lexical_signal},
                       {"noise", c.noise},
                       {"spec_label_coupling", c.spec_label_coupling},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& in, SynthConfig& c) {
  if (!in.is_object()) throw ConfigError("synth config must be an object");
  const nlohmann::json defaults = SynthConfig{};
  for (const auto& [key, value] : in.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError("synth config: unknown key '" + key + "'");
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (in.contains(key)) in.at(key).get_to(field);
  };
  get("topics", c.topics);
  get("shared_vocab", c.shared_vocab);
  get("topic_vocab", c.topic_vocab);
  get("sentences_per_topic", c.sentences_per_topic);
  get("min_length", c.min_length);
  get("max_length", c.max_length);
  get("exclusive_rate", c.exclusive_rate);
  get("leakage", c.leakage);
  get("zipf_exponent", c.zipf_exponent);
  get("dim", c.dim);
  get("num_classes", c.num_classes);
  get("label_signal", c.label_signal);
  get("topic_signal", c.topic_signal);
  get("topic_offset", c.topic_offset);
  get("spec_signal", c.spec_signal);
  get("lexical_signal", c.lexical_signal);
  get("noise", c.noise);
  get("spec_label_coupling", c.spec_label_coupling);
  get("seed", c.seed);
}

const TaskDataset& SynthData::dataset(TaskKind task) const {
  auto it = datasets.find(task);
  if (it == datasets.end()) {
    throw DataError("synth data has no " + std::string(task_name(task)) +
                    " dataset");
  }
  return it->second;
}

Eigen::MatrixXd SynthData::class_subspace() const {
  const int k = config.num_classes;
  return basis.leftCols(k + config.topics * k);
}

namespace {

// Token types: shared ones first, then each topic's exclusive pool.
struct Vocabulary {
  std::vector<std::string> names;
  std::vector<int> classes;
  std::vector<int> owner;  // topic for exclusive types, -1 for shared
  std::vector<double> zipf_cdf;
  int shared = 0;
  int per_topic = 0;

  int exclusive(int topic, int k) const {
    return shared + topic * per_topic + k;
  }
};

Vocabulary make_vocabulary(const SynthConfig& cfg) {
  Vocabulary v;
  v.shared = cfg.shared_vocab;
  v.per_topic = cfg.topic_vocab;
  Rng rng(derive_seed(cfg.seed, "synth_classes"));
  const int k = cfg.num_classes;
  for (int i = 0; i < cfg.shared_vocab; ++i) {
    v.names.push_back("w" + std::to_string(i));
    v.owner.push_back(-1);
    v.classes.push_back(cfg.spec_label_coupling
                            ? 1 + static_cast<int>(rng.below(k - 1))
                            : static_cast<int>(rng.below(k)));
  }
  for (int t = 0; t < cfg.topics; ++t) {
    for (int i = 0; i < cfg.topic_vocab; ++i) {
      v.names.push_back("t" + std::to_string(t) + "x" + std::to_string(i));
      v.owner.push_back(t);
      v.classes.push_back(cfg.spec_label_coupling
                              ? 0
                              : static_cast<int>(rng.below(k)));
    }
  }
  double total = 0.0;
  for (int r = 0; r < cfg.shared_vocab; ++r) {
    total += std::pow(r + 1.0, -cfg.zipf_exponent);
    v.zipf_cdf.push_back(total);
  }
  for (double& c : v.zipf_cdf) c /= total;
  return v;
}

int draw_type(const SynthConfig& cfg, const Vocabulary& v, int topic,
              Rng& rng) {
  if (rng.uniform() < cfg.exclusive_rate) {
    int pool = topic;
    if (cfg.leakage > 0.0 && rng.uniform() < cfg.leakage) {
      pool = static_cast<int>(rng.below(cfg.topics - 1));
      if (pool >= topic) ++pool;
    }
    return v.exclusive(pool, static_cast<int>(rng.below(cfg.topic_vocab)));
  }
  const double u = rng.uniform();
  const auto it = std::upper_bound(v.zipf_cdf.begin(), v.zipf_cdf.end(), u);
  return static_cast<int>(
      std::min<ptrdiff_t>(it - v.zipf_cdf.begin(), cfg.shared_vocab - 1));
}

Eigen::MatrixXd planted_basis(const SynthConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "synth_basis"));
  const int n = cfg.planted_directions();
  Eigen::MatrixXd gaussian(cfg.dim, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < cfg.dim; ++r) gaussian(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  return qr.householderQ() * Eigen::MatrixXd::Identity(cfg.dim, n);
}

}  // namespace

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  const int m = cfg.topics;
  const int k = cfg.num_classes;
  const int dim = cfg.dim;
  const Vocabulary vocab = make_vocabulary(cfg);

  SynthData data;
  data.config = cfg;
  data.basis = planted_basis(cfg);
  const Eigen::MatrixXd& basis = data.basis;
  auto label_dir = [&](int c) { return basis.col(c); };
  auto topic_label_dir = [&](int t, int c) { return basis.col(k + t * k + c); };
  auto topic_dir = [&](int t) { return basis.col(k + m * k + t); };
  const int spec_col = k + m * k + m;
  auto stance_dir = [&](int s) { return basis.col(spec_col + 1 + s); };
  auto topic_stance_dir = [&](int t, int s) {
    return basis.col(spec_col + 1 + kStances + t * kStances + s);
  };

  Eigen::MatrixXd lexical(dim, static_cast<Eigen::Index>(vocab.names.size()));
  {
    Rng rng(derive_seed(cfg.seed, "synth_lexical"));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index c = 0; c < lexical.cols(); ++c) {
      for (int r = 0; r < dim; ++r) lexical(r, c) = scale * rng.normal();
    }
  }

  Rng token_rng(derive_seed(cfg.seed, "synth_tokens"));
  Rng stance_rng(derive_seed(cfg.seed, "synth_stance"));
  Rng task_rng(derive_seed(cfg.seed, "synth_tasks"));
  Rng noise_rng(derive_seed(cfg.seed, "synth_noise"));

  std::vector<Sentence> sentences;
  std::vector<Instance> pos, ner, dep, stance;
  StoreBuilder builder(static_cast<uint32_t>(dim));
  std::vector<float> values;
  Eigen::VectorXd h(dim);

  for (int t = 0; t < m; ++t) {
    const std::string topic = "topic" + std::to_string(t);
    for (int s = 0; s < cfg.sentences_per_topic; ++s) {
      Sentence sent;
      sent.sentence_id = "t" + std::to_string(t) + "-s" + std::to_string(s);
      sent.topic = topic;
      const int length =
          cfg.min_length +
          static_cast<int>(token_rng.below(cfg.max_length - cfg.min_length + 1));
      std::vector<int> types;
      for (int i = 0; i < length; ++i) {
        types.push_back(draw_type(cfg, vocab, t, token_rng));
        sent.tokens.push_back(vocab.names[types.back()]);
      }
      const int st = static_cast<int>(stance_rng.below(kStances));

      values.assign(static_cast<size_t>(length) * dim, 0.0f);
      for (int i = 0; i < length; ++i) {
        const int w = types[i];
        const int c = vocab.classes[w];
        const double spec = vocab.owner[w] >= 0 ? 1.0 : -1.0;
        h = cfg.label_signal * label_dir(c) +
            cfg.topic_signal * topic_label_dir(t, c) +
            cfg.topic_offset * topic_dir(t) +
            cfg.spec_signal * spec * basis.col(spec_col) +
            cfg.label_signal * stance_dir(st) +
            cfg.topic_signal * topic_stance_dir(t, st) +
            cfg.lexical_signal * lexical.col(w);
        for (int r = 0; r < dim; ++r) {
          h[r] += cfg.noise * noise_rng.normal();
          values[static_cast<size_t>(i) * dim + r] = static_cast<float>(h[r]);
        }
      }
      builder.add(sent.sentence_id, static_cast<uint32_t>(length), values);

      const std::string& sid = sent.sentence_id;
      for (int i = 0; i < length; ++i) {
        Instance inst;
        inst.instance_id = "pos:" + sid + ":" + std::to_string(i);
        inst.task = TaskKind::kPos;
        inst.sentence_id = sid;
        inst.positions = {{static_cast<uint32_t>(i)}};
        inst.label = "C" + std::to_string(vocab.classes[types[i]]);
        inst.topic = topic;
        pos.push_back(std::move(inst));
      }

      // NER: the first topic-exclusive token, optionally with its successor.
      for (int i = 0; i < length; ++i) {
        if (vocab.owner[types[i]] < 0) continue;
        Instance inst;
        inst.instance_id = "ner:" + sid + ":" + std::to_string(i);
        inst.task = TaskKind::kNer;
        inst.sentence_id = sid;
        Slot span = {static_cast<uint32_t>(i)};
        if (i + 1 < length && task_rng.below(2) == 1) {
          span.push_back(static_cast<uint32_t>(i + 1));
        }
        inst.positions = {span};
        // Coupled vocabularies put every exclusive type in class 0, so the
        // entity type falls back to the type's index within its pool.
        const int entity = cfg.spec_label_coupling
                               ? (types[i] - vocab.shared) % vocab.per_topic %
                                     cfg.num_classes
                               : vocab.classes[types[i]];
        inst.label = "E" + std::to_string(entity);
        inst.topic = topic;
        ner.push_back(std::move(inst));
        break;
      }

      // DEP: up to two arcs between adjacent tokens, head first.
      const int arcs = std::min(2, length - 1);
      std::vector<int> heads;
      for (int a = 0; a < arcs; ++a) {
        const int i = static_cast<int>(task_rng.below(length - 1));
        if (std::find(heads.begin(), heads.end(), i) != heads.end()) continue;
        heads.push_back(i);
        Instance inst;
        inst.instance_id = "dep:" + sid + ":" + std::to_string(i);
        inst.task = TaskKind::kDep;
        inst.sentence_id = sid;
        inst.positions = {{static_cast<uint32_t>(i)},
                          {static_cast<uint32_t>(i + 1)}};
        inst.label = "R" + std::to_string(vocab.classes[types[i]]) +
                     std::to_string(vocab.classes[types[i + 1]]);
        inst.topic = topic;
        dep.push_back(std::move(inst));
      }

      Instance inst;
      inst.instance_id = "stance:" + sid;
      inst.task = TaskKind::kStance;
      inst.sentence_id = sid;
      Slot all(length);
      for (int i = 0; i < length; ++i) all[i] = static_cast<uint32_t>(i);
      inst.positions = {all};
      inst.label = kStanceLabels[st];
      inst.topic = topic;
      stance.push_back(std::move(inst));

      sentences.push_back(std::move(sent));
    }
  }

  data.corpus = std::make_shared<const Corpus>(std::move(sentences));
  data.store = std::move(builder).build();
  data.datasets.emplace(TaskKind::kPos,
                        TaskDataset(TaskKind::kPos, std::move(pos), data.corpus));
  data.datasets.emplace(TaskKind::kNer,
                        TaskDataset(TaskKind::kNer, std::move(ner), data.corpus));
  data.datasets.emplace(TaskKind::kDep,
                        TaskDataset(TaskKind::kDep, std::move(dep), data.corpus));
  data.datasets.emplace(
      TaskKind::kStance,
      TaskDataset(TaskKind::kStance, std::move(stance), data.corpus));
  return data;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_sentences(*data.corpus, dir / "sentences.jsonl");
  nlohmann::ordered_json datasets = nlohmann::ordered_json::object();
  nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
  for (const auto& [task, dataset] : data.datasets) {
    const std::string name = to_lower(task_name(task));
    save_dataset(dataset, dir / (name + ".jsonl"));
    datasets[name] = name + ".jsonl";
    tasks.push_back(name);
  }
  write_store(data.store, dir / "store.tprb");
  nlohmann::json synth = data.config;
  write_file_atomic(dir / "synth.json", synth.dump(2) + "\n");

  nlohmann::ordered_json experiment;
  experiment["sentences"] = "sentences.jsonl";
  experiment["datasets"] = datasets;
  experiment["stores"] = {{"synth", "store.tprb"}};
  experiment["tasks"] = tasks;
  experiment["modes"] = {"in", "cross"};
  experiment["seeds"] = {0, 1, 2};
  experiment["out"] = "out";
  write_file_atomic(dir / "experiment.json", experiment.dump(2) + "\n");
}

}  // namespace topicprobe
