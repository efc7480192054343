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

#include "topicprobe/corpus.h"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "topicprobe/error.h"
#include "topicprobe/util.h"

namespace topicprobe {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kTaskNames[] = {"DEP", "POS", "NER", "STANCE",
                                           "TOPICSPEC"};

std::string where(const std::filesystem::path& path, size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where(path, number) + "malformed JSON: " + e.what());
    }
    if (!value.is_object()) {
      throw DataError(where(path, number) + "expected a JSON object");
    }
    try {
      fn(value, number);
    } catch (const json::exception& e) {
      throw DataError(where(path, number) + e.what());
    }
  }
}

const json& field(const json& object, const char* name) {
  auto it = object.find(name);
  if (it == object.end()) {
    throw DataError(std::string("missing field '") + name + "'");
  }
  return *it;
}

}  // namespace

std::string_view task_name(TaskKind task) {
  return kTaskNames[static_cast<int>(task)];
}

TaskKind parse_task(std::string_view name) {
  const std::string upper = [&] {
    std::string s(name);
    for (char& c : s) c = static_cast<char>(std::toupper(c));
    return s;
  }();
  for (int i = 0; i < 5; ++i) {
    if (kTaskNames[i] == upper) return static_cast<TaskKind>(i);
  }
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

Corpus::Corpus(std::vector<Sentence> sentences)
    : sentences_(std::move(sentences)) {
  index_.reserve(sentences_.size());
  for (size_t i = 0; i < sentences_.size(); ++i) {
    const Sentence& s = sentences_[i];
    if (s.tokens.empty()) {
      throw DataError("sentence '" + s.sentence_id + "' has no tokens");
    }
    if (!index_.emplace(s.sentence_id, i).second) {
      throw DataError("duplicate sentence_id '" + s.sentence_id + "'");
    }
    if (std::find(topics_.begin(), topics_.end(), s.topic) == topics_.end()) {
      topics_.push_back(s.topic);
    }
  }
}

const Sentence* Corpus::find(std::string_view sentence_id) const {
  auto it = index_.find(std::string(sentence_id));
  return it == index_.end() ? nullptr : &sentences_[it->second];
}

const Sentence& Corpus::at(std::string_view sentence_id) const {
  const Sentence* s = find(sentence_id);
  if (s == nullptr) {
    throw DataError("unknown sentence_id '" + std::string(sentence_id) + "'");
  }
  return *s;
}

Corpus load_sentences(const std::filesystem::path& path) {
  std::vector<Sentence> sentences;
  for_each_line(path, [&](const json& value, size_t) {
    Sentence s;
    s.sentence_id = field(value, "sentence_id").get<std::string>();
    s.topic = field(value, "topic").get<std::string>();
    s.tokens = field(value, "tokens").get<std::vector<std::string>>();
    sentences.push_back(std::move(s));
  });
  return Corpus(std::move(sentences));
}

void save_sentences(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const Sentence& s : corpus.sentences()) {
    ordered_json line;
    line["sentence_id"] = s.sentence_id;
    line["topic"] = s.topic;
    line["tokens"] = s.tokens;
    out += line.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

void validate_instance(const Instance& inst, const Corpus& corpus) {
  const auto fail = [&](const std::string& what) {
    throw DataError("instance '" + inst.instance_id + "': " + what);
  };
  const Sentence* sentence = corpus.find(inst.sentence_id);
  if (sentence == nullptr) fail("unknown sentence_id '" + inst.sentence_id + "'");
  if (inst.topic != sentence->topic) {
    fail("topic '" + inst.topic + "' differs from sentence topic '" +
         sentence->topic + "'");
  }
  const size_t n = sentence->tokens.size();
  for (const Slot& slot : inst.positions) {
    for (uint32_t p : slot) {
      if (p >= n) {
        fail("position " + std::to_string(p) + " out of range for " +
             std::to_string(n) + " tokens");
      }
    }
  }
  const auto& slots = inst.positions;
  const auto single = [&](size_t count) {
    if (slots.size() != count) {
      fail("arity mismatch: " + std::string(task_name(inst.task)) +
           " expects " + std::to_string(count) + " slot(s), got " +
           std::to_string(slots.size()));
    }
    for (const Slot& slot : slots) {
      if (slot.size() != 1) fail("arity mismatch: slot must hold one index");
    }
  };
  switch (inst.task) {
    case TaskKind::kDep:
      single(2);
      break;
    case TaskKind::kPos:
    case TaskKind::kTopicSpec:
      single(1);
      break;
    case TaskKind::kNer:
      if (slots.size() != 1 || slots[0].empty()) {
        fail("arity mismatch: NER expects one non-empty span");
      }
      for (size_t i = 1; i < slots[0].size(); ++i) {
        if (slots[0][i] != slots[0][i - 1] + 1) fail("NER span not contiguous");
      }
      break;
    case TaskKind::kStance:
      if (slots.size() != 1 || slots[0].size() != n) {
        fail("arity mismatch: STANCE slot must span the whole sentence");
      }
      for (size_t i = 0; i < n; ++i) {
        if (slots[0][i] != i) fail("STANCE slot must list indices 0..n-1");
      }
      break;
  }
}

TaskDataset::TaskDataset(TaskKind task, std::vector<Instance> instances,
                         std::shared_ptr<const Corpus> corpus)
    : task_(task), instances_(std::move(instances)), corpus_(std::move(corpus)) {
  build({}, false);
}

TaskDataset::TaskDataset(TaskKind task, std::vector<Instance> instances,
                         std::shared_ptr<const Corpus> corpus,
                         std::vector<std::string> label_set)
    : task_(task), instances_(std::move(instances)), corpus_(std::move(corpus)) {
  build(std::move(label_set), true);
}

void TaskDataset::build(std::vector<std::string> fixed_labels, bool fixed) {
  if (!corpus_) throw DataError("dataset requires a corpus");
  if (instances_.empty()) throw DataError("dataset has no instances");
  std::unordered_map<std::string, int> label_ids;
  std::unordered_map<std::string, int> topic_ids;
  if (fixed) {
    label_set_ = std::move(fixed_labels);
    for (size_t i = 0; i < label_set_.size(); ++i) {
      label_ids.emplace(label_set_[i], static_cast<int>(i));
    }
  }
  index_.reserve(instances_.size());
  for (size_t i = 0; i < instances_.size(); ++i) {
    Instance& inst = instances_[i];
    if (inst.task != task_) {
      throw DataError("instance '" + inst.instance_id + "' has task " +
                      std::string(task_name(inst.task)) + ", expected " +
                      std::string(task_name(task_)));
    }
    if (!index_.emplace(inst.instance_id, i).second) {
      throw DataError("duplicate instance id '" + inst.instance_id + "'");
    }
    validate_instance(inst, *corpus_);
    auto label = label_ids.find(inst.label);
    if (label == label_ids.end()) {
      if (fixed) {
        throw DataError("instance '" + inst.instance_id + "': label '" +
                        inst.label + "' not in label set");
      }
      label = label_ids.emplace(inst.label, static_cast<int>(label_set_.size()))
                  .first;
      label_set_.push_back(inst.label);
    }
    inst.label_id = label->second;
    auto topic = topic_ids.find(inst.topic);
    if (topic == topic_ids.end()) {
      topic = topic_ids.emplace(inst.topic, static_cast<int>(topic_set_.size()))
                  .first;
      topic_set_.push_back(inst.topic);
    }
    inst.topic_id = topic->second;
  }
  if (label_set_.size() < 2) {
    throw DataError("dataset needs at least 2 labels, found " +
                    std::to_string(label_set_.size()));
  }
}

size_t TaskDataset::index_of(std::string_view instance_id) const {
  auto it = index_.find(std::string(instance_id));
  if (it == index_.end()) {
    throw DataError("unknown instance id '" + std::string(instance_id) + "'");
  }
  return it->second;
}

std::vector<int> TaskDataset::labels() const {
  std::vector<int> out;
  out.reserve(instances_.size());
  for (const Instance& inst : instances_) out.push_back(inst.label_id);
  return out;
}

std::vector<int> TaskDataset::topics() const {
  std::vector<int> out;
  out.reserve(instances_.size());
  for (const Instance& inst : instances_) out.push_back(inst.topic_id);
  return out;
}

TaskDataset TaskDataset::relabeled(std::span<const int> permutation) const {
  if (permutation.size() != label_set_.size()) {
    throw DataError("relabel permutation has wrong size");
  }
  std::vector<std::string> names(label_set_.size());
  for (size_t old_id = 0; old_id < label_set_.size(); ++old_id) {
    names.at(permutation[old_id]) = label_set_[old_id];
  }
  return TaskDataset(task_, instances_, corpus_, std::move(names));
}

TaskDataset load_dataset(const std::filesystem::path& path, TaskKind task,
                         std::shared_ptr<const Corpus> corpus) {
  if (!corpus) throw DataError("load_dataset requires a sentence corpus");
  std::vector<Instance> instances;
  std::unordered_map<std::string, size_t> seen;
  for_each_line(path, [&](const json& value, size_t line) {
    Instance inst;
    inst.instance_id = field(value, "id").get<std::string>();
    inst.task = parse_task(field(value, "task").get<std::string>());
    inst.sentence_id = field(value, "sentence_id").get<std::string>();
    inst.positions = field(value, "positions").get<std::vector<Slot>>();
    inst.label = field(value, "label").get<std::string>();
    inst.topic = field(value, "topic").get<std::string>();
    if (inst.task != task) {
      throw DataError(where(path, line) + "instance '" + inst.instance_id +
                      "' has task " + std::string(task_name(inst.task)) +
                      ", expected " + std::string(task_name(task)));
    }
    if (!seen.emplace(inst.instance_id, line).second) {
      throw DataError(where(path, line) + "duplicate instance id '" +
                      inst.instance_id + "'");
    }
    try {
      validate_instance(inst, *corpus);
    } catch (const DataError& e) {
      throw DataError(where(path, line) + e.what());
    }
    instances.push_back(std::move(inst));
  });
  return TaskDataset(task, std::move(instances), std::move(corpus));
}

std::string serialize_dataset(const TaskDataset& dataset) {
  std::string out;
  for (const Instance& inst : dataset.instances()) {
    ordered_json line;
    line["id"] = inst.instance_id;
    line["task"] = task_name(inst.task);
    line["sentence_id"] = inst.sentence_id;
    line["positions"] = inst.positions;
    line["label"] = inst.label;
    line["topic"] = inst.topic;
    out += line.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const TaskDataset& dataset,
                  const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(dataset));
}

std::vector<std::string> relevant_tokens(const Instance& inst,
                                         const Corpus& corpus) {
  const Sentence& sentence = corpus.at(inst.sentence_id);
  std::vector<std::string> out;
  for (const Slot& slot : inst.positions) {
    for (uint32_t p : slot) out.push_back(to_lower(sentence.tokens.at(p)));
  }
  return out;
}

std::string lexical_key(const Instance& inst, const Corpus& corpus) {
  const std::vector<std::string> tokens = relevant_tokens(inst, corpus);
  const char sep = inst.task == TaskKind::kDep ? '\t' : ' ';
  std::string key;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) key.push_back(sep);
    key += tokens[i];
  }
  return key;
}

std::set<std::string> vocabulary_of(const TaskDataset& dataset,
                                    std::span<const size_t> indices) {
  std::set<std::string> vocab;
  for (size_t i : indices) {
    if (i >= dataset.size()) throw DataError("instance index out of range");
    for (std::string& token :
         relevant_tokens(dataset.instance(i), dataset.corpus())) {
      vocab.insert(std::move(token));
    }
  }
  return vocab;
}

std::set<std::string> vocabulary(const TaskDataset& dataset,
                                 std::span<const std::string> instance_ids) {
  std::vector<size_t> indices;
  indices.reserve(instance_ids.size());
  for (const std::string& id : instance_ids) {
    indices.push_back(dataset.index_of(id));
  }
  return vocabulary_of(dataset, indices);
}

}  // namespace topicprobe
