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

#ifndef TOPICPROBE_SYNTH_H_
#define TOPICPROBE_SYNTH_H_

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <vector>

#include "topicprobe/corpus.h"
#include "topicprobe/embedstore.h"

namespace topicprobe {

// Generator for planted-signal corpora. Each token vector is a sum of
// orthonormal planted directions:
//
//   label_signal * L[c]            class c of the token type, shared by topics
//   topic_signal * T[t][c]         class c expressed through a topic-t direction
//   topic_offset * U[t]            sentence topic
//   spec_signal * (+/-1) * S       +1 for topic-exclusive types, -1 otherwise
//   label_signal * G[s]            sentence stance s
//   topic_signal * V[t][s]         stance through a topic-t direction
//   lexical_signal * E[w]          random per-type vector
//   noise * N(0, I)
struct SynthConfig {
  int topics = 4;
  int shared_vocab = 300;
  int topic_vocab = 60;  // exclusive types per topic
  int sentences_per_topic = 200;
  int min_length = 8;
  int max_length = 14;
  // Probability that a position draws from a topic-exclusive pool.
  double exclusive_rate = 0.35;
  // Probability that such a draw uses another topic's pool.
  double leakage = 0.0;
  double zipf_exponent = 1.0;
  int dim = 96;
  int num_classes = 4;
  double label_signal = 1.0;
  double topic_signal = 0.0;
  double topic_offset = 0.5;
  double spec_signal = 0.0;
  double lexical_signal = 0.0;
  double noise = 0.5;
  // Topic-exclusive types get class 0, shared types classes 1..K-1.
  bool spec_label_coupling = false;
  uint64_t seed = 0;

  int planted_directions() const;
  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& out, const SynthConfig& cfg);
void from_json(const nlohmann::json& in, SynthConfig& cfg);

struct SynthData {
  SynthConfig config;
  std::shared_ptr<const Corpus> corpus;
  std::map<TaskKind, TaskDataset> datasets;  // POS, NER, DEP, STANCE
  EmbeddingStore store;
  // D x planted_directions() orthonormal columns, in the order
  // L, T, U, S, G, V.
  Eigen::MatrixXd basis;

  const TaskDataset& dataset(TaskKind task) const;
  // Columns of `basis` spanning the token-class directions (L and T).
  Eigen::MatrixXd class_subspace() const;
};

SynthData generate(const SynthConfig& cfg);

// Writes sentences.jsonl, {pos,ner,dep,stance}.jsonl, store.tprb,
// synth.json and an experiment.json wiring them together.
void write_synth(const SynthData& data, const std::filesystem::path& dir);

}  // namespace topicprobe

#endif  // TOPICPROBE_SYNTH_H_
