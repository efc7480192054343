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

#ifndef TOPICPROBE_CORPUS_H_
#define TOPICPROBE_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topicprobe {

enum class TaskKind { kDep, kPos, kNer, kStance, kTopicSpec };

// "DEP", "POS", "NER", "STANCE", "TOPICSPEC".
std::string_view task_name(TaskKind task);

// Case-insensitive inverse of task_name. Throws ConfigError.
TaskKind parse_task(std::string_view name);

struct Sentence {
  std::string sentence_id;
  std::string topic;
  std::vector<std::string> tokens;

  bool operator==(const Sentence&) const = default;
};

// The sentence side of a probing corpus. Immutable once built.
class Corpus {
 public:
  Corpus() = default;
  // Throws DataError on duplicate ids or empty token lists.
  explicit Corpus(std::vector<Sentence> sentences);

  const Sentence* find(std::string_view sentence_id) const;
  const Sentence& at(std::string_view sentence_id) const;

  std::span<const Sentence> sentences() const { return sentences_; }
  size_t size() const { return sentences_.size(); }
  // Topics in first-occurrence order.
  const std::vector<std::string>& topics() const { return topics_; }

 private:
  std::vector<Sentence> sentences_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<std::string> topics_;
};

Corpus load_sentences(const std::filesystem::path& path);
void save_sentences(const Corpus& corpus, const std::filesystem::path& path);

// One list of token indices per slot. DEP has two single-index slots (head,
// dependent), NER one contiguous span, POS/TOPICSPEC one index, STANCE one
// slot covering the whole sentence.
using Slot = std::vector<uint32_t>;

struct Instance {
  std::string instance_id;
  TaskKind task = TaskKind::kPos;
  std::string sentence_id;
  std::vector<Slot> positions;
  std::string label;
  std::string topic;
  // Dense ids assigned by TaskDataset.
  int label_id = -1;
  int topic_id = -1;

  bool operator==(const Instance&) const = default;
};

// Checks slot arity and index ranges against the sentence. Throws DataError
// naming the instance.
void validate_instance(const Instance& instance, const Corpus& corpus);

class TaskDataset {
 public:
  // Label and topic sets are collected in first-occurrence order.
  TaskDataset(TaskKind task, std::vector<Instance> instances,
              std::shared_ptr<const Corpus> corpus);
  // Fixed label order; every instance label must be in `label_set`.
  TaskDataset(TaskKind task, std::vector<Instance> instances,
              std::shared_ptr<const Corpus> corpus,
              std::vector<std::string> label_set);

  TaskKind task() const { return task_; }
  std::span<const Instance> instances() const { return instances_; }
  const Instance& instance(size_t i) const { return instances_[i]; }
  size_t size() const { return instances_.size(); }
  const std::vector<std::string>& label_set() const { return label_set_; }
  const std::vector<std::string>& topic_set() const { return topic_set_; }
  int num_labels() const { return static_cast<int>(label_set_.size()); }
  int num_topics() const { return static_cast<int>(topic_set_.size()); }
  const Corpus& corpus() const { return *corpus_; }
  const std::shared_ptr<const Corpus>& corpus_ptr() const { return corpus_; }

  // Throws DataError for unknown ids.
  size_t index_of(std::string_view instance_id) const;
  std::vector<int> labels() const;
  std::vector<int> topics() const;

  // Copy with labels remapped through `permutation` (old id -> new id).
  TaskDataset relabeled(std::span<const int> permutation) const;

 private:
  void build(std::vector<std::string> fixed_labels, bool fixed);

  TaskKind task_;
  std::vector<Instance> instances_;
  std::shared_ptr<const Corpus> corpus_;
  std::vector<std::string> label_set_;
  std::vector<std::string> topic_set_;
  std::unordered_map<std::string, size_t> index_;
};

// Reads the line-delimited instance file. Errors carry the line number.
TaskDataset load_dataset(const std::filesystem::path& path, TaskKind task,
                         std::shared_ptr<const Corpus> corpus);
void save_dataset(const TaskDataset& dataset,
                  const std::filesystem::path& path);
std::string serialize_dataset(const TaskDataset& dataset);

// Lowercased surface tokens at an instance's positions, all slots flattened.
std::vector<std::string> relevant_tokens(const Instance& instance,
                                         const Corpus& corpus);

// Key used for seen/unseen matching: lowercased token (POS, TOPICSPEC),
// ordered "head\tdependent" pair (DEP), space-joined span (NER, STANCE).
std::string lexical_key(const Instance& instance, const Corpus& corpus);

std::set<std::string> vocabulary(const TaskDataset& dataset,
                                 std::span<const std::string> instance_ids);
std::set<std::string> vocabulary_of(const TaskDataset& dataset,
                                    std::span<const size_t> indices);

}  // namespace topicprobe

#endif  // TOPICPROBE_CORPUS_H_
