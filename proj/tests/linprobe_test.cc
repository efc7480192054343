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
#include <numeric>

#include "oracles.h"
#include "test_util.h"
#include "topicprobe/error.h"
#include "topicprobe/linprobe.h"
#include "topicprobe/random.h"
#include "topicprobe/util.h"

namespace topicprobe {
namespace {

using testing::TempDir;

// Gaussian blobs around class means at distance `sep` along axis c.
struct Blobs {
  FeatureMatrix features;
  std::vector<int> labels;
};

Blobs make_blobs(int n, int k, int d, double sep, uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  b.features.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.below(k));
    b.labels.push_back(c);
    for (int j = 0; j < d; ++j) {
      b.features(i, j) =
          static_cast<float>(rng.normal() + (j == c ? sep : 0.0));
    }
  }
  return b;
}

std::vector<size_t> range(size_t begin, size_t end) {
  std::vector<size_t> r(end - begin);
  std::iota(r.begin(), r.end(), begin);
  return r;
}

TEST_CASE("softmax gradient matches central differences") {
  Rng rng(42);
  const int k = 3, d = 5, n = 7;
  Eigen::MatrixXd w(k, d), x(n, d);
  Eigen::VectorXd b(k);
  for (int i = 0; i < k * d; ++i) w.data()[i] = rng.normal();
  for (int i = 0; i < n * d; ++i) x.data()[i] = rng.normal();
  for (int i = 0; i < k; ++i) b[i] = rng.normal();
  std::vector<int> y;
  for (int i = 0; i < n; ++i) y.push_back(static_cast<int>(rng.below(k)));

  const LossAndGradient lg = softmax_cross_entropy(w, b, x, y);
  CHECK(lg.loss == doctest::Approx(oracle::cross_entropy(w, b, x, y)).epsilon(1e-12));
  const Eigen::MatrixXd gw = oracle::numeric_gradient(
      w, [&](const Eigen::MatrixXd& m) { return oracle::cross_entropy(m, b, x, y); });
  const Eigen::MatrixXd gb = oracle::numeric_gradient(
      b, [&](const Eigen::MatrixXd& m) {
        return oracle::cross_entropy(w, m.col(0), x, y);
      });
  CHECK((lg.grad_weights - gw).norm() <= 1e-4 * gw.norm());
  CHECK((lg.grad_bias - gb.col(0)).norm() <= 1e-4 * gb.norm());
}

TEST_CASE("zero parameters cost log K per example") {
  const Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 3);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(4);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
  const std::vector<int> y(10, 2);
  CHECK(softmax_cross_entropy(w, b, x, y).loss == doctest::Approx(std::log(4.0)));
}

TEST_CASE("probe learns separable blobs") {
  const Blobs b = make_blobs(1200, 4, 8, 3.0, 1);
  const auto train = make_probe_data(b.features, b.labels, range(0, 800));
  const auto dev = make_probe_data(b.features, b.labels, range(800, 1000));
  const auto test = make_probe_data(b.features, b.labels, range(1000, 1200));
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  const TrainResult r = train_probe(train, dev, 4, cfg);
  const auto pred = predict_all(r.model, test);
  int hit = 0;
  for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test.labels[i];
  CHECK(hit / 200.0 > 0.9);
  CHECK(r.history.size() == 20);
  CHECK(r.best_epoch >= 1);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
  CHECK(r.model.label_map == std::vector<std::string>{"0", "1", "2", "3"});
}

TEST_CASE("training is deterministic per seed") {
  const Blobs b = make_blobs(300, 3, 4, 1.0, 2);
  const auto train = make_probe_data(b.features, b.labels, range(0, 200));
  const auto dev = make_probe_data(b.features, b.labels, range(200, 300));
  TrainConfig cfg;
  cfg.epochs = 3;
  const TrainResult a = train_probe(train, dev, 3, cfg);
  const TrainResult c = train_probe(train, dev, 3, cfg);
  CHECK(a.model.weights == c.model.weights);
  cfg.seed = 9;
  const TrainResult other = train_probe(train, dev, 3, cfg);
  CHECK(other.model.weights != a.model.weights);
}

TEST_CASE("best epoch selection and no-dev fallback") {
  const Blobs b = make_blobs(200, 2, 3, 2.0, 3);
  const auto train = make_probe_data(b.features, b.labels, range(0, 150));
  const auto dev = make_probe_data(b.features, b.labels, range(150, 200));
  TrainConfig cfg;
  cfg.epochs = 5;
  const TrainResult r = train_probe(train, dev, 2, cfg);
  double best = -1;
  int best_epoch = 0;
  for (const EpochStats& s : r.history) {
    if (s.dev_macro_f1 > best) {
      best = s.dev_macro_f1;
      best_epoch = s.epoch;
    }
  }
  CHECK(r.best_epoch == best_epoch);
  const ProbeData empty = make_probe_data(b.features, b.labels, {});
  CHECK(train_probe(train, empty, 2, cfg).best_epoch == 5);
}

TEST_CASE("non-finite features raise NumericError") {
  Blobs b = make_blobs(50, 2, 3, 1.0, 4);
  b.features(3, 1) = std::numeric_limits<float>::quiet_NaN();
  const auto train = make_probe_data(b.features, b.labels, range(0, 50));
  const ProbeData empty = make_probe_data(b.features, b.labels, {});
  TrainConfig cfg;
  cfg.dropout = 0.0;
  CHECK_THROWS_AS(train_probe(train, empty, 2, cfg), NumericError);
}

TEST_CASE("bad input raises DataError or ConfigError") {
  const Blobs b = make_blobs(20, 2, 3, 1.0, 5);
  const auto train = make_probe_data(b.features, b.labels, range(0, 20));
  const ProbeData empty = make_probe_data(b.features, b.labels, {});
  TrainConfig cfg;
  CHECK_THROWS_AS(train_probe(empty, empty, 2, cfg), DataError);
  CHECK_THROWS_AS(train_probe(train, empty, 1, cfg), DataError);
  auto bad = train;
  bad.labels[0] = 7;
  CHECK_THROWS_AS(train_probe(bad, empty, 2, cfg), DataError);
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_probe(train, empty, 2, cfg), ConfigError);
  cfg.epochs = 1;
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config JSON round-trip") {
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.learning_rate = 0.125;
  cfg.select_on_dev = false;
  const nlohmann::json j = cfg;
  const TrainConfig back = j.get<TrainConfig>();
  CHECK(back.epochs == 7);
  CHECK(back.learning_rate == 0.125);
  CHECK_FALSE(back.select_on_dev);
  CHECK(back.batch_size == 64);
}

TEST_CASE("prediction breaks ties toward the smallest id") {
  ProbeModel m;
  m.weights = Eigen::MatrixXd::Zero(3, 2);
  m.bias = Eigen::VectorXd::Zero(3);
  const std::vector<float> v = {1.f, 2.f};
  CHECK(predict(m, v).label == 0);
  m.bias << 0.0, 1.0, 1.0;
  CHECK(predict(m, v).label == 1);
  CHECK_THROWS_AS(predict(m, std::vector<float>{1.f}), DataError);
}

TEST_CASE("codelength of the zero model is n log2 K") {
  const Blobs b = make_blobs(37, 5, 3, 1.0, 6);
  ProbeModel m;
  m.weights = Eigen::MatrixXd::Zero(5, 3);
  m.bias = Eigen::VectorXd::Zero(5);
  const auto data = make_probe_data(b.features, b.labels, range(0, 37));
  CHECK(codelength_bits(m, data) == doctest::Approx(37 * std::log2(5.0)));
}

TEST_CASE("PRBM round-trip") {
  TempDir dir;
  ProbeModel m;
  m.task = TaskKind::kNer;
  m.weights = Eigen::MatrixXd::Random(3, 4);
  m.bias = Eigen::VectorXd::Random(3);
  m.label_map = {"PER", "ORG", "LOC"};
  save_probe(m, dir / "p.prbm");
  const ProbeModel back = load_probe(dir / "p.prbm");
  CHECK(back.task == TaskKind::kNer);
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.label_map == m.label_map);
  write_file_atomic(dir / "bad.prbm", "PRBX");
  CHECK_THROWS_AS(load_probe(dir / "bad.prbm"), DataError);
}

}  // namespace
}  // namespace topicprobe
