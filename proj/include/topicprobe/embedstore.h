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

#ifndef TOPICPROBE_EMBEDSTORE_H_
#define TOPICPROBE_EMBEDSTORE_H_

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topicprobe/corpus.h"

namespace topicprobe {

// Row-major (instances x features) matrix of aggregated instance vectors.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// TPRB layout (all integers and floats little-endian):
//   "TPRB" | u32 version=1 | u32 dim | u64 sentence_count
//   per sentence: u32 id_length | id bytes | u32 token_count |
//                 token_count*dim float32
//   u32 CRC32 over the per-sentence blocks
inline constexpr char kStoreMagic[4] = {'T', 'P', 'R', 'B'};
inline constexpr uint32_t kStoreVersion = 1;
inline constexpr size_t kStoreHeaderSize = 4 + 4 + 4 + 8;

// Frozen-encoder token embeddings, one (token_count x dim) matrix per
// sentence. Copies share the same immutable backing bytes, so a store can be
// handed to concurrent readers freely.
class EmbeddingStore {
 public:
  struct Entry {
    std::string sentence_id;
    uint32_t token_count = 0;
    size_t offset = 0;  // byte offset of the first float
  };

  EmbeddingStore() = default;

  // Memory-maps a TPRB file and validates header, layout and checksum.
  static EmbeddingStore open(const std::filesystem::path& path);
  // Same validation over an in-memory TPRB image.
  static EmbeddingStore from_bytes(std::vector<std::byte> bytes);

  uint32_t dim() const { return dim_; }
  size_t size() const { return entries_.size(); }
  std::span<const Entry> entries() const { return entries_; }
  const Entry* find(std::string_view sentence_id) const;
  // Throws DataError for a missing sentence.
  const Entry& entry(std::string_view sentence_id) const;

  void read_token(const Entry& entry, uint32_t token,
                  std::span<float> out) const;
  // Row-major token_count x dim copy.
  std::vector<float> matrix(std::string_view sentence_id) const;

  // The raw TPRB image, suitable for writing back to disk.
  std::span<const std::byte> bytes() const;

 private:
  struct Backing;
  void index();

  std::shared_ptr<const Backing> backing_;
  uint32_t dim_ = 0;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> lookup_;
};

EmbeddingStore open_store(const std::filesystem::path& path);
void write_store(const EmbeddingStore& store,
                 const std::filesystem::path& path);

// Appends sentences to an in-memory TPRB image.
class StoreBuilder {
 public:
  explicit StoreBuilder(uint32_t dim);

  // `values` is row-major token_count x dim.
  void add(std::string_view sentence_id, uint32_t token_count,
           std::span<const float> values);
  EmbeddingStore build() &&;

 private:
  uint32_t dim_;
  uint64_t count_ = 0;
  std::vector<std::byte> bytes_;
};

// Reads `<store>.meta.json` if present (encoder id, layer, ...).
std::optional<std::string> read_store_metadata(
    const std::filesystem::path& store_path);

struct InstanceVector {
  std::string instance_id;
  std::vector<float> values;
};

// Width of an instance vector: 2*dim for DEP, dim otherwise.
size_t instance_dim(TaskKind task, uint32_t dim);

// POS/TOPICSPEC: the token vector. NER/STANCE: mean over the slot. DEP:
// head slot vector followed by dependent slot vector. Means accumulate in
// double and round once.
InstanceVector instance_vector(const EmbeddingStore& store,
                               const Instance& instance);

// Instance vectors for the whole dataset, one row per instance.
FeatureMatrix build_features(const EmbeddingStore& store,
                             const TaskDataset& dataset);

// Every corpus sentence must be present with a matching token count.
void check_store_coverage(const EmbeddingStore& store, const Corpus& corpus);

// New store whose token vectors are `map * h` for every stored vector h.
// `map` must be dim x dim.
EmbeddingStore map_store(const EmbeddingStore& store,
                         const Eigen::MatrixXd& map);

}  // namespace topicprobe

#endif  // TOPICPROBE_EMBEDSTORE_H_
