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

#include "topicprobe/embedstore.h"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "topicprobe/error.h"
#include "topicprobe/util.h"

namespace topicprobe {

static_assert(std::endian::native == std::endian::little,
              "TPRB I/O assumes a little-endian host");

struct EmbeddingStore::Backing {
  std::vector<std::byte> owned;
  const std::byte* data = nullptr;
  size_t size = 0;
  void* mapping = nullptr;

  Backing() = default;
  Backing(const Backing&) = delete;
  Backing& operator=(const Backing&) = delete;
  ~Backing() {
    if (mapping != nullptr) munmap(mapping, size);
  }
};

namespace {

template <typename T>
T load_le(const std::byte* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

template <typename T>
void append_le(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& path) {
  auto backing = std::make_shared<Backing>();
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw DataError("cannot open store " + path.string());
  struct stat st;
  if (fstat(fd, &st) != 0) {
    ::close(fd);
    throw DataError("cannot stat store " + path.string());
  }
  backing->size = static_cast<size_t>(st.st_size);
  if (backing->size > 0) {
    void* mapped =
        mmap(nullptr, backing->size, PROT_READ, MAP_PRIVATE, fd, 0);
    if (mapped == MAP_FAILED) {
      ::close(fd);
      throw DataError("cannot map store " + path.string());
    }
    backing->mapping = mapped;
    backing->data = static_cast<const std::byte*>(mapped);
  }
  ::close(fd);
  EmbeddingStore store;
  store.backing_ = std::move(backing);
  try {
    store.index();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return store;
}

EmbeddingStore EmbeddingStore::from_bytes(std::vector<std::byte> bytes) {
  auto backing = std::make_shared<Backing>();
  backing->owned = std::move(bytes);
  backing->data = backing->owned.data();
  backing->size = backing->owned.size();
  EmbeddingStore store;
  store.backing_ = std::move(backing);
  store.index();
  return store;
}

void EmbeddingStore::index() {
  const std::byte* data = backing_->data;
  const size_t size = backing_->size;
  if (size < kStoreHeaderSize + 4) throw DataError("truncated store header");
  if (std::memcmp(data, kStoreMagic, 4) != 0) {
    throw DataError("bad magic, not a TPRB store");
  }
  const auto version = load_le<uint32_t>(data + 4);
  if (version != kStoreVersion) {
    throw DataError("unsupported TPRB version " + std::to_string(version));
  }
  dim_ = load_le<uint32_t>(data + 8);
  if (dim_ == 0) throw DataError("store dim must be positive");
  const auto count = load_le<uint64_t>(data + 12);

  const size_t payload_end = size - 4;
  size_t pos = kStoreHeaderSize;
  entries_.clear();
  lookup_.clear();
  entries_.reserve(static_cast<size_t>(std::min<uint64_t>(count, 1u << 24)));
  for (uint64_t i = 0; i < count; ++i) {
    if (pos + 4 > payload_end) throw DataError("truncated payload");
    const auto id_length = load_le<uint32_t>(data + pos);
    pos += 4;
    if (pos + id_length + 4 > payload_end) throw DataError("truncated payload");
    Entry e;
    e.sentence_id.assign(reinterpret_cast<const char*>(data + pos), id_length);
    pos += id_length;
    e.token_count = load_le<uint32_t>(data + pos);
    pos += 4;
    e.offset = pos;
    const size_t block = static_cast<size_t>(e.token_count) * dim_ * 4;
    if (block > payload_end - pos) throw DataError("truncated payload");
    pos += block;
    if (!lookup_.emplace(e.sentence_id, entries_.size()).second) {
      throw DataError("duplicate sentence '" + e.sentence_id + "' in store");
    }
    entries_.push_back(std::move(e));
  }
  if (pos != payload_end) throw DataError("trailing bytes after payload");
  const uint32_t stored = load_le<uint32_t>(data + payload_end);
  const uint32_t actual = crc32_of(std::span<const std::byte>(
      data + kStoreHeaderSize, payload_end - kStoreHeaderSize));
  if (stored != actual) throw DataError("payload checksum mismatch");
}

const EmbeddingStore::Entry* EmbeddingStore::find(
    std::string_view sentence_id) const {
  auto it = lookup_.find(std::string(sentence_id));
  return it == lookup_.end() ? nullptr : &entries_[it->second];
}

const EmbeddingStore::Entry& EmbeddingStore::entry(
    std::string_view sentence_id) const {
  const Entry* e = find(sentence_id);
  if (e == nullptr) {
    throw DataError("sentence '" + std::string(sentence_id) +
                    "' missing from embedding store");
  }
  return *e;
}

void EmbeddingStore::read_token(const Entry& e, uint32_t token,
                                std::span<float> out) const {
  if (token >= e.token_count) {
    throw DataError("token index " + std::to_string(token) +
                    " out of range for sentence '" + e.sentence_id + "'");
  }
  if (out.size() != dim_) throw DataError("read_token buffer has wrong size");
  std::memcpy(out.data(),
              backing_->data + e.offset + static_cast<size_t>(token) * dim_ * 4,
              static_cast<size_t>(dim_) * 4);
}

std::vector<float> EmbeddingStore::matrix(std::string_view sentence_id) const {
  const Entry& e = entry(sentence_id);
  std::vector<float> out(static_cast<size_t>(e.token_count) * dim_);
  std::memcpy(out.data(), backing_->data + e.offset, out.size() * 4);
  return out;
}

std::span<const std::byte> EmbeddingStore::bytes() const {
  if (!backing_) return {};
  return {backing_->data, backing_->size};
}

EmbeddingStore open_store(const std::filesystem::path& path) {
  return EmbeddingStore::open(path);
}

void write_store(const EmbeddingStore& store,
                 const std::filesystem::path& path) {
  const auto bytes = store.bytes();
  write_file_atomic(path, std::string_view(
                              reinterpret_cast<const char*>(bytes.data()),
                              bytes.size()));
}

StoreBuilder::StoreBuilder(uint32_t dim) : dim_(dim) {
  if (dim == 0) throw DataError("store dim must be positive");
  bytes_.insert(bytes_.end(), reinterpret_cast<const std::byte*>(kStoreMagic),
                reinterpret_cast<const std::byte*>(kStoreMagic) + 4);
  append_le<uint32_t>(bytes_, kStoreVersion);
  append_le<uint32_t>(bytes_, dim_);
  append_le<uint64_t>(bytes_, 0);  // patched in build()
}

void StoreBuilder::add(std::string_view sentence_id, uint32_t token_count,
                       std::span<const float> values) {
  if (values.size() != static_cast<size_t>(token_count) * dim_) {
    throw DataError("sentence '" + std::string(sentence_id) +
                    "': value count does not match token_count x dim");
  }
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw DataError("sentence '" + std::string(sentence_id) +
                      "': non-finite embedding value");
    }
  }
  append_le<uint32_t>(bytes_, static_cast<uint32_t>(sentence_id.size()));
  const auto* id = reinterpret_cast<const std::byte*>(sentence_id.data());
  bytes_.insert(bytes_.end(), id, id + sentence_id.size());
  append_le<uint32_t>(bytes_, token_count);
  const auto* raw = reinterpret_cast<const std::byte*>(values.data());
  bytes_.insert(bytes_.end(), raw, raw + values.size() * 4);
  ++count_;
}

EmbeddingStore StoreBuilder::build() && {
  std::memcpy(bytes_.data() + 12, &count_, 8);
  const uint32_t crc = crc32_of(std::span<const std::byte>(
      bytes_.data() + kStoreHeaderSize, bytes_.size() - kStoreHeaderSize));
  append_le<uint32_t>(bytes_, crc);
  return EmbeddingStore::from_bytes(std::move(bytes_));
}

std::optional<std::string> read_store_metadata(
    const std::filesystem::path& store_path) {
  std::filesystem::path meta = store_path;
  meta += ".meta.json";
  if (!std::filesystem::exists(meta)) return std::nullopt;
  return read_file(meta);
}

size_t instance_dim(TaskKind task, uint32_t dim) {
  return task == TaskKind::kDep ? 2 * static_cast<size_t>(dim) : dim;
}

namespace {

// Mean of the slot's token vectors, written to `out` (length dim).
void aggregate_slot(const EmbeddingStore& store,
                    const EmbeddingStore::Entry& entry, const Slot& slot,
                    std::span<float> out, std::vector<float>& scratch,
                    std::vector<double>& sum) {
  if (slot.empty()) throw DataError("empty position slot");
  std::fill(sum.begin(), sum.end(), 0.0);
  for (uint32_t p : slot) {
    store.read_token(entry, p, scratch);
    for (size_t k = 0; k < sum.size(); ++k) sum[k] += scratch[k];
  }
  const double n = static_cast<double>(slot.size());
  for (size_t k = 0; k < sum.size(); ++k) {
    out[k] = static_cast<float>(sum[k] / n);
  }
}

void fill_instance(const EmbeddingStore& store, const Instance& inst,
                   std::span<float> out, std::vector<float>& scratch,
                   std::vector<double>& sum) {
  const auto& entry = store.entry(inst.sentence_id);
  const size_t dim = store.dim();
  if (inst.task == TaskKind::kDep) {
    if (inst.positions.size() != 2) {
      throw DataError("instance '" + inst.instance_id + "': DEP needs 2 slots");
    }
    aggregate_slot(store, entry, inst.positions[0], out.subspan(0, dim),
                   scratch, sum);
    aggregate_slot(store, entry, inst.positions[1], out.subspan(dim, dim),
                   scratch, sum);
  } else {
    if (inst.positions.size() != 1) {
      throw DataError("instance '" + inst.instance_id + "': expected 1 slot");
    }
    aggregate_slot(store, entry, inst.positions[0], out, scratch, sum);
  }
}

}  // namespace

InstanceVector instance_vector(const EmbeddingStore& store,
                               const Instance& inst) {
  InstanceVector v;
  v.instance_id = inst.instance_id;
  v.values.resize(instance_dim(inst.task, store.dim()));
  std::vector<float> scratch(store.dim());
  std::vector<double> sum(store.dim());
  fill_instance(store, inst, v.values, scratch, sum);
  return v;
}

FeatureMatrix build_features(const EmbeddingStore& store,
                             const TaskDataset& dataset) {
  const size_t width = instance_dim(dataset.task(), store.dim());
  FeatureMatrix features(static_cast<Eigen::Index>(dataset.size()),
                         static_cast<Eigen::Index>(width));
  std::vector<float> scratch(store.dim());
  std::vector<double> sum(store.dim());
  for (size_t i = 0; i < dataset.size(); ++i) {
    std::span<float> row(features.row(static_cast<Eigen::Index>(i)).data(),
                         width);
    fill_instance(store, dataset.instance(i), row, scratch, sum);
  }
  return features;
}

void check_store_coverage(const EmbeddingStore& store, const Corpus& corpus) {
  for (const Sentence& s : corpus.sentences()) {
    const auto& e = store.entry(s.sentence_id);
    if (e.token_count != s.tokens.size()) {
      throw DataError("sentence '" + s.sentence_id + "' has " +
                      std::to_string(s.tokens.size()) + " tokens but " +
                      std::to_string(e.token_count) + " stored vectors");
    }
  }
}

EmbeddingStore map_store(const EmbeddingStore& store,
                         const Eigen::MatrixXd& map) {
  const Eigen::Index dim = store.dim();
  if (map.rows() != dim || map.cols() != dim) {
    throw DataError("store map must be dim x dim");
  }
  StoreBuilder builder(store.dim());
  std::vector<float> values;
  for (const auto& e : store.entries()) {
    values = store.matrix(e.sentence_id);
    // Row-major (tokens x dim); each row h becomes (map * h)^T = h^T map^T.
    Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                              Eigen::RowMajor>>
        tokens(values.data(), e.token_count, dim);
    const Eigen::MatrixXd mapped = tokens.cast<double>() * map.transpose();
    tokens = mapped.cast<float>();
    builder.add(e.sentence_id, e.token_count, values);
  }
  return std::move(builder).build();
}

}  // namespace topicprobe
