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
#include <numeric>

#include "topicprobe/error.h"
#include "topicprobe/mdl.h"
#include "topicprobe/random.h"

namespace topicprobe {
namespace {

struct Data {
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<int> topics;
  std::vector<size_t> rows;
};

// Labels uniform over k; features carry `signal` along axis label plus
// Gaussian noise of scale `noise`; topics cycle over `m`.
Data make_data(int n, int k, int d, double signal, double noise, int m,
               uint64_t seed) {
  Rng rng(seed);
  Data out;
  out.features.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.below(k));
    out.labels.push_back(c);
    out.topics.push_back(i % m);
    out.rows.push_back(static_cast<size_t>(i));
    for (int j = 0; j < d; ++j) {
      out.features(i, j) =
          static_cast<float>(noise * rng.normal() + (j == c ? signal : 0.0));
    }
  }
  return out;
}

TEST_CASE("fractions are 2^-10 .. 2^-1") {
  const auto f = mdl_fractions();
  REQUIRE(f.size() == 10);
  CHECK(f.front() == 1.0 / 1024);
  CHECK(f.back() == 0.5);
  for (size_t i = 1; i < f.size(); ++i) CHECK(f[i] == 2 * f[i - 1]);
}

TEST_CASE("in-topic MDL bookkeeping and noise compression") {
  const Data d = make_data(2048, 3, 8, 0.0, 0.3, 4, 1);
  const MdlReport r = mdl_online(d.features, d.labels, d.topics, d.rows, 3,
                                 TrainConfig{}, Mode::kIn, 0);
  CHECK(r.n == 2048);
  CHECK(r.uniform_bits == 2048 * std::log2(3.0));
  REQUIRE(r.steps.size() == 10);
  CHECK(r.steps[0].train_size == 2);
  CHECK(r.steps[9].train_size == 1024);
  CHECK(r.steps[9].eval_size == 1024);
  double sum = 0;
  for (const auto& s : r.steps) sum += s.bits;
  CHECK(r.mdl_bits == doctest::Approx(sum));
  CHECK(r.compression > 0.95);
  CHECK(r.compression < 1.05);
}

TEST_CASE("signal compresses better than noise") {
  const Data d = make_data(2048, 3, 8, 3.0, 0.5, 4, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  const MdlReport r = mdl_online(d.features, d.labels, d.topics, d.rows, 3,
                                 cfg, Mode::kIn, 0);
  CHECK(r.compression > 2.0);
}

TEST_CASE("first block option adds the uniform cost of block one") {
  const Data d = make_data(2048, 2, 4, 0.0, 0.3, 4, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  const MdlReport a = mdl_online(d.features, d.labels, d.topics, d.rows, 2,
                                 cfg, Mode::kIn, 0);
  const MdlReport b = mdl_online(d.features, d.labels, d.topics, d.rows, 2,
                                 cfg, Mode::kIn, 0, {true});
  CHECK(b.first_block_bits == 2.0);
  CHECK(b.mdl_bits == doctest::Approx(a.mdl_bits + 2.0));
}

TEST_CASE("cross-topic MDL splits by topic") {
  const Data d = make_data(4400, 2, 4, 0.0, 0.3, 4, 4);
  TrainConfig cfg;
  cfg.epochs = 2;
  const MdlReport r = mdl_online(d.features, d.labels, d.topics, d.rows, 2,
                                 cfg, Mode::kCross, 0);
  CHECK(r.n == 4400);
  CHECK(r.uniform_bits == 4400.0);
  std::vector<int> one_topic(d.topics.size(), 0);
  CHECK_THROWS_AS(mdl_online(d.features, d.labels, one_topic, d.rows, 2, cfg,
                             Mode::kCross, 0),
                  DataError);
}

TEST_CASE("too few instances") {
  const Data d = make_data(500, 2, 4, 0.0, 0.3, 4, 5);
  CHECK_THROWS_AS(mdl_online(d.features, d.labels, d.topics, d.rows, 2,
                             TrainConfig{}, Mode::kIn, 0),
                  DataError);
}

TEST_CASE("relabeling leaves compression unchanged") {
  const Data d = make_data(2048, 3, 6, 1.0, 1.0, 4, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  const std::vector<int> perm = {2, 0, 1};
  std::vector<int> relabeled;
  for (int l : d.labels) relabeled.push_back(perm[l]);
  const MdlReport a = mdl_online(d.features, d.labels, d.topics, d.rows, 3,
                                 cfg, Mode::kIn, 7);
  const MdlReport b = mdl_online(d.features, relabeled, d.topics, d.rows, 3,
                                 cfg, Mode::kIn, 7);
  CHECK(std::abs(a.compression - b.compression) <= 1e-9);
}

}  // namespace
}  // namespace topicprobe
