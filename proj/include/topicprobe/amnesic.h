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

#ifndef TOPICPROBE_AMNESIC_H_
#define TOPICPROBE_AMNESIC_H_

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "topicprobe/corpus.h"
#include "topicprobe/embedstore.h"
#include "topicprobe/linprobe.h"

namespace topicprobe {

enum class ProjectionSource : uint32_t { kTopic = 0, kRandom = 1 };

struct ProjectionMatrix {
  Eigen::MatrixXd matrix;  // D x D
  int removed_rank = 0;
  int iterations = 0;
  ProjectionSource source = ProjectionSource::kTopic;
};

// P = I - B B^T with B an orthonormal basis of rowspace(W) from the SVD;
// directions with singular value below 1e-8 * sigma_max are dropped.
// Throws NumericError for non-finite input.
ProjectionMatrix nullspace_projection(const Eigen::MatrixXd& weights);

struct AmnesicConfig {
  TrainConfig probe;
  int max_iterations = 20;
  // Stop once a fresh probe's dev accuracy is <= majority + tolerance.
  double tolerance = 0.02;
  double dev_fraction = 0.2;
  uint64_t seed = 0;
};

void to_json(nlohmann::json& out, const AmnesicConfig& cfg);
void from_json(const nlohmann::json& in, AmnesicConfig& cfg);

struct AmnesicIteration {
  double dev_accuracy = 0.0;
  int removed_rank = 0;  // rank removed before this probe was trained
};

struct AmnesicResult {
  ProjectionMatrix projection;
  std::vector<AmnesicIteration> trace;
  double majority_baseline = 0.0;
  double final_accuracy = 0.0;  // fresh probe on the final projection
  bool converged = false;
};

// Iterative nullspace projection against the TOPICSPEC probe: train, stack
// the probe's weight rows, rebuild P from the stack, repeat until a fresh
// probe is within tolerance of the majority baseline or max_iterations
// projections were composed.
AmnesicResult amnesic_remove(const EmbeddingStore& store,
                             const TaskDataset& topicspec,
                             const AmnesicConfig& cfg);

// Control: P from a seeded Gaussian (rank x dim) matrix. Throws ConfigError
// when rank >= dim.
ProjectionMatrix random_remove(uint32_t dim, int rank, uint64_t seed);
ProjectionMatrix random_remove(const EmbeddingStore& store, int rank,
                               uint64_t seed);

// Token vectors h become P h, before any instance aggregation.
EmbeddingStore project_store(const EmbeddingStore& store,
                             const ProjectionMatrix& projection);

// "PRJM" | u32 version=1 | u32 D | u32 removed_rank | u32 iterations |
// u32 source | D*D f64 row-major | u32 CRC32 of everything before it.
void save_projection(const ProjectionMatrix& projection,
                     const std::filesystem::path& path);
ProjectionMatrix load_projection(const std::filesystem::path& path);

}  // namespace topicprobe

#endif  // TOPICPROBE_AMNESIC_H_
