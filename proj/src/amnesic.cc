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

#include "topicprobe/amnesic.h"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "topicprobe/error.h"
#include "topicprobe/random.h"
#include "topicprobe/util.h"

namespace topicprobe {

ProjectionMatrix nullspace_projection(const Eigen::MatrixXd& weights) {
  if (!weights.allFinite()) {
    throw NumericError("nullspace_projection: non-finite weights");
  }
  const Eigen::Index dim = weights.cols();
  ProjectionMatrix out;
  out.matrix = Eigen::MatrixXd::Identity(dim, dim);
  if (weights.rows() == 0 || dim == 0) return out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(weights, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma.size() == 0 || sigma[0] == 0.0) return out;
  const double cutoff = 1e-8 * sigma[0];
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma[rank] >= cutoff) ++rank;
  const Eigen::MatrixXd basis = svd.matrixV().leftCols(rank);
  out.matrix -= basis * basis.transpose();
  // Symmetrize away rounding.
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  out.removed_rank = static_cast<int>(rank);
  return out;
}

void to_json(nlohmann::json& out, const AmnesicConfig& cfg) {
  out = nlohmann::json{{"probe", cfg.probe},
                       {"max_iterations", cfg.max_iterations},
                       {"tolerance", cfg.tolerance},
                       {"dev_fraction", cfg.dev_fraction},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& in, AmnesicConfig& cfg) {
  if (in.contains("probe")) in.at("probe").get_to(cfg.probe);
  if (in.contains("max_iterations")) in.at("max_iterations").get_to(cfg.max_iterations);
  if (in.contains("tolerance")) in.at("tolerance").get_to(cfg.tolerance);
  if (in.contains("dev_fraction")) in.at("dev_fraction").get_to(cfg.dev_fraction);
  if (in.contains("seed")) in.at("seed").get_to(cfg.seed);
}

namespace {

double accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
  size_t hit = 0;
  for (size_t i = 0; i < gold.size(); ++i) hit += pred[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

}  // namespace

AmnesicResult amnesic_remove(const EmbeddingStore& store,
                             const TaskDataset& topicspec,
                             const AmnesicConfig& cfg) {
  if (cfg.max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (!(cfg.dev_fraction > 0.0 && cfg.dev_fraction < 1.0)) {
    throw ConfigError("dev_fraction must lie in (0, 1)");
  }
  const FeatureMatrix original = build_features(store, topicspec);
  const std::vector<int> labels = topicspec.labels();
  const int num_classes = topicspec.num_labels();
  const Eigen::Index dim = original.cols();

  std::vector<size_t> order(topicspec.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(derive_seed(cfg.seed, "amnesic_split"));
  rng.shuffle(std::span<size_t>(order));
  const auto dev_size = static_cast<size_t>(
      std::ceil(cfg.dev_fraction * static_cast<double>(order.size())));
  if (dev_size == 0 || dev_size >= order.size()) {
    throw DataError("TOPICSPEC dataset too small for a train/dev split");
  }
  std::vector<size_t> dev_rows(order.begin(), order.begin() + dev_size);
  std::vector<size_t> train_rows(order.begin() + dev_size, order.end());
  std::sort(dev_rows.begin(), dev_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  AmnesicResult result;
  {
    std::vector<size_t> counts(num_classes, 0);
    for (size_t r : train_rows) ++counts[labels[r]];
    const int majority = static_cast<int>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    size_t hit = 0;
    for (size_t r : dev_rows) hit += labels[r] == majority;
    result.majority_baseline =
        static_cast<double>(hit) / static_cast<double>(dev_rows.size());
  }

  Eigen::MatrixXd stack(0, dim);
  ProjectionMatrix projection;
  projection.matrix = Eigen::MatrixXd::Identity(dim, dim);
  projection.source = ProjectionSource::kTopic;
  FeatureMatrix projected = original;
  for (int iteration = 0;; ++iteration) {
    const ProbeData train = make_probe_data(projected, labels, train_rows);
    const ProbeData dev = make_probe_data(projected, labels, dev_rows);
    TrainConfig probe_cfg = cfg.probe;
    probe_cfg.seed = derive_seed(cfg.seed, "amnesic_probe",
                                 static_cast<uint64_t>(iteration));
    const TrainResult fit = train_probe(train, dev, num_classes, probe_cfg,
                                        TaskKind::kTopicSpec);
    const double acc = accuracy(predict_all(fit.model, dev), dev.labels);
    result.trace.push_back({acc, projection.removed_rank});
    result.final_accuracy = acc;
    if (acc <= result.majority_baseline + cfg.tolerance) {
      result.converged = true;
      break;
    }
    if (iteration == cfg.max_iterations) break;

    Eigen::MatrixXd grown(stack.rows() + fit.model.weights.rows(), dim);
    grown << stack, fit.model.weights;
    stack = std::move(grown);
    const int previous_rank = projection.removed_rank;
    projection = nullspace_projection(stack);
    projection.source = ProjectionSource::kTopic;
    projection.iterations = iteration + 1;
    if (projection.removed_rank >= dim) {
      throw NumericError("amnesic removal exhausted the embedding space");
    }
    if (projection.removed_rank == previous_rank) {
      // The probe found nothing new to remove; further iterations would
      // retrain the same classifier.
      break;
    }
    projected =
        (original.cast<double>() * projection.matrix).cast<float>();
  }
  result.projection = std::move(projection);
  return result;
}

ProjectionMatrix random_remove(uint32_t dim, int rank, uint64_t seed) {
  if (rank < 0) throw ConfigError("rank must be >= 0");
  if (static_cast<uint32_t>(rank) >= dim) {
    throw ConfigError("random removal rank " + std::to_string(rank) +
                      " must be below dim " + std::to_string(dim));
  }
  Rng rng(derive_seed(seed, "random_remove"));
  Eigen::MatrixXd gaussian(rank, dim);
  for (int r = 0; r < rank; ++r) {
    for (uint32_t c = 0; c < dim; ++c) gaussian(r, c) = rng.normal();
  }
  ProjectionMatrix out = nullspace_projection(gaussian);
  out.source = ProjectionSource::kRandom;
  return out;
}

ProjectionMatrix random_remove(const EmbeddingStore& store, int rank,
                               uint64_t seed) {
  return random_remove(store.dim(), rank, seed);
}

EmbeddingStore project_store(const EmbeddingStore& store,
                             const ProjectionMatrix& projection) {
  return map_store(store, projection.matrix);
}

namespace {

constexpr char kProjectionMagic[4] = {'P', 'R', 'J', 'M'};
constexpr uint32_t kProjectionVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("truncated projection file");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_projection(const ProjectionMatrix& projection,
                     const std::filesystem::path& path) {
  std::string out(kProjectionMagic, 4);
  const auto dim = static_cast<uint32_t>(projection.matrix.rows());
  put<uint32_t>(out, kProjectionVersion);
  put<uint32_t>(out, dim);
  put<uint32_t>(out, static_cast<uint32_t>(projection.removed_rank));
  put<uint32_t>(out, static_cast<uint32_t>(projection.iterations));
  put<uint32_t>(out, static_cast<uint32_t>(projection.source));
  for (uint32_t r = 0; r < dim; ++r) {
    for (uint32_t c = 0; c < dim; ++c) put<double>(out, projection.matrix(r, c));
  }
  put<uint32_t>(out, crc32_of(std::as_bytes(std::span(out.data(), out.size()))));
  write_file_atomic(path, out);
}

ProjectionMatrix load_projection(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.size() < 28 || std::memcmp(in.data(), kProjectionMagic, 4) != 0) {
    throw DataError(path.string() + ": not a projection file");
  }
  size_t pos = 4;
  if (take<uint32_t>(in, pos) != kProjectionVersion) {
    throw DataError(path.string() + ": unsupported projection version");
  }
  ProjectionMatrix p;
  const auto dim = take<uint32_t>(in, pos);
  p.removed_rank = static_cast<int>(take<uint32_t>(in, pos));
  p.iterations = static_cast<int>(take<uint32_t>(in, pos));
  const auto source = take<uint32_t>(in, pos);
  if (source > 1) throw DataError(path.string() + ": bad projection source");
  p.source = static_cast<ProjectionSource>(source);
  if (in.size() != pos + static_cast<size_t>(dim) * dim * 8 + 4) {
    throw DataError(path.string() + ": projection size mismatch");
  }
  p.matrix.resize(dim, dim);
  for (uint32_t r = 0; r < dim; ++r) {
    for (uint32_t c = 0; c < dim; ++c) p.matrix(r, c) = take<double>(in, pos);
  }
  const uint32_t expected =
      crc32_of(std::as_bytes(std::span(in.data(), pos)));
  if (take<uint32_t>(in, pos) != expected) {
    throw DataError(path.string() + ": projection checksum mismatch");
  }
  return p;
}

}  // namespace topicprobe
