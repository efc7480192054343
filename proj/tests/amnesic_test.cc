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

#include <cmath>
#include <limits>

#include "test_util.h"
#include "topicprobe/amnesic.h"
#include "topicprobe/error.h"
#include "topicprobe/random.h"
#include "topicprobe/synth.h"
#include "topicprobe/topicspec.h"
#include "topicprobe/util.h"

namespace topicprobe {
namespace {

using testing::TempDir;

Eigen::MatrixXd gaussian(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows * cols; ++i) m.data()[i] = rng.normal();
  return m;
}

TEST_CASE("nullspace projection properties") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(30));
    const int k = 1 + static_cast<int>(rng.below(d - 1));
    const Eigen::MatrixXd w = gaussian(k, d, rng);
    const ProjectionMatrix p = nullspace_projection(w);
    CHECK(p.removed_rank == k);
    CHECK((w * p.matrix).cwiseAbs().maxCoeff() <
          1e-5 * w.cwiseAbs().maxCoeff());
    CHECK((p.matrix * p.matrix - p.matrix).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p.matrix - p.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.matrix.trace() == doctest::Approx(d - k));
  }
}

TEST_CASE("rank-deficient weights remove only their row space") {
  Rng rng(4);
  Eigen::MatrixXd w(3, 6);
  w.row(0) = gaussian(1, 6, rng);
  w.row(1) = 2.0 * w.row(0);
  w.row(2) = gaussian(1, 6, rng);
  CHECK(nullspace_projection(w).removed_rank == 2);
}

TEST_CASE("zero and non-finite weights") {
  const ProjectionMatrix p = nullspace_projection(Eigen::MatrixXd::Zero(2, 4));
  CHECK(p.removed_rank == 0);
  CHECK(p.matrix == Eigen::MatrixXd::Identity(4, 4));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 3);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(nullspace_projection(bad), NumericError);
}

TEST_CASE("random removal") {
  const ProjectionMatrix p = random_remove(10u, 4, 1);
  CHECK(p.removed_rank == 4);
  CHECK(p.source == ProjectionSource::kRandom);
  CHECK(p.matrix.trace() == doctest::Approx(6.0));
  CHECK(random_remove(10u, 4, 1).matrix == p.matrix);
  CHECK(random_remove(10u, 0, 1).matrix == Eigen::MatrixXd::Identity(10, 10));
  CHECK_THROWS_AS(random_remove(10u, 10, 1), ConfigError);
  CHECK_THROWS_AS(random_remove(10u, -1, 1), ConfigError);
}

TEST_CASE("PRJM round-trip and corruption") {
  TempDir dir;
  ProjectionMatrix p = random_remove(5u, 2, 9);
  p.iterations = 3;
  save_projection(p, dir / "p.prjm");
  const ProjectionMatrix back = load_projection(dir / "p.prjm");
  CHECK(back.matrix == p.matrix);
  CHECK(back.removed_rank == 2);
  CHECK(back.iterations == 3);
  CHECK(back.source == ProjectionSource::kRandom);
  std::string bytes = read_file(dir / "p.prjm");
  bytes[40] ^= 1;
  write_file_atomic(dir / "bad.prjm", bytes);
  CHECK_THROWS_AS(load_projection(dir / "bad.prjm"), DataError);
}

TEST_CASE("projected stores hold P h per token") {
  const auto corpus = testing::small_corpus(1, 1);
  StoreBuilder b(2);
  b.add("s0_0", 3, std::vector<float>{1, 2, 3, 4, 5, 6});
  const EmbeddingStore store = std::move(b).build();
  Eigen::MatrixXd w(1, 2);
  w << 1, 0;
  const EmbeddingStore out = project_store(store, nullspace_projection(w));
  const auto m = out.matrix("s0_0");
  CHECK(m == std::vector<float>{0, 2, 0, 4, 0, 6});
}

TEST_CASE("iterative removal drives the topic probe to the majority baseline") {
  SynthConfig cfg;
  cfg.topics = 4;
  cfg.sentences_per_topic = 60;
  cfg.dim = 48;
  cfg.num_classes = 3;
  cfg.spec_signal = 2.0;
  cfg.noise = 0.3;
  const SynthData data = generate(cfg);
  const auto scores = score_all(build_counts(*data.corpus));
  const TaskDataset ts =
      make_topicspec_dataset(bin_tokens(scores), data.corpus);
  AmnesicConfig acfg;
  acfg.probe.epochs = 8;
  acfg.probe.learning_rate = 1e-2;
  const AmnesicResult r = amnesic_remove(data.store, ts, acfg);
  CHECK(r.trace.front().dev_accuracy > r.majority_baseline + 0.1);
  CHECK(r.converged);
  CHECK(r.final_accuracy <= r.majority_baseline + acfg.tolerance);
  CHECK(r.projection.removed_rank > 0);
  CHECK(r.projection.removed_rank < 48);
  CHECK(r.projection.iterations == static_cast<int>(r.trace.size()) - 1);
}

TEST_CASE("zero iterations leave the space untouched") {
  SynthConfig cfg;
  cfg.topics = 3;
  cfg.sentences_per_topic = 20;
  cfg.dim = 40;
  cfg.num_classes = 2;
  cfg.spec_signal = 2.0;
  const SynthData data = generate(cfg);
  const auto scores = score_all(build_counts(*data.corpus));
  const TaskDataset ts =
      make_topicspec_dataset(bin_tokens(scores), data.corpus);
  AmnesicConfig acfg;
  acfg.max_iterations = 0;
  acfg.probe.epochs = 2;
  const AmnesicResult r = amnesic_remove(data.store, ts, acfg);
  CHECK(r.projection.removed_rank == 0);
  CHECK(r.trace.size() == 1);
  acfg.dev_fraction = 1.5;
  CHECK_THROWS_AS(amnesic_remove(data.store, ts, acfg), ConfigError);
}

}  // namespace
}  // namespace topicprobe
