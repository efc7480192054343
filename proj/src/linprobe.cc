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

#include "topicprobe/linprobe.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "topicprobe/error.h"
#include "topicprobe/metrics.h"
#include "topicprobe/random.h"
#include "topicprobe/util.h"

namespace topicprobe {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw ConfigError("warmup_fraction must lie in [0, 1]");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

void to_json(nlohmann::json& out, const TrainConfig& cfg) {
  out = nlohmann::json{{"epochs", cfg.epochs},
                       {"batch_size", cfg.batch_size},
                       {"learning_rate", cfg.learning_rate},
                       {"weight_decay", cfg.weight_decay},
                       {"dropout", cfg.dropout},
                       {"warmup_fraction", cfg.warmup_fraction},
                       {"seed", cfg.seed},
                       {"beta1", cfg.beta1},
                       {"beta2", cfg.beta2},
                       {"epsilon", cfg.epsilon},
                       {"select_on_dev", cfg.select_on_dev}};
}

void from_json(const nlohmann::json& in, TrainConfig& cfg) {
  const auto get = [&](const char* key, auto& field) {
    if (in.contains(key)) in.at(key).get_to(field);
  };
  get("epochs", cfg.epochs);
  get("batch_size", cfg.batch_size);
  get("learning_rate", cfg.learning_rate);
  get("weight_decay", cfg.weight_decay);
  get("dropout", cfg.dropout);
  get("warmup_fraction", cfg.warmup_fraction);
  get("seed", cfg.seed);
  get("beta1", cfg.beta1);
  get("beta2", cfg.beta2);
  get("epsilon", cfg.epsilon);
  get("select_on_dev", cfg.select_on_dev);
}

ProbeData make_probe_data(const FeatureMatrix& features,
                          std::span<const int> all_labels,
                          std::span<const size_t> rows) {
  ProbeData data;
  data.features = &features;
  data.rows.assign(rows.begin(), rows.end());
  data.labels.reserve(rows.size());
  for (size_t r : rows) data.labels.push_back(all_labels[r]);
  return data;
}

namespace {

// Numerically stable log-softmax of each row.
Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    const double lse =
        top + std::log((logits.row(i).array() - top).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

Eigen::MatrixXd gather(const ProbeData& data, std::span<const size_t> order,
                       size_t begin, size_t end) {
  const FeatureMatrix& f = *data.features;
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(end - begin), f.cols());
  for (size_t i = begin; i < end; ++i) {
    batch.row(static_cast<Eigen::Index>(i - begin)) =
        f.row(static_cast<Eigen::Index>(data.rows[order[i]])).cast<double>();
  }
  return batch;
}

void check_data(const ProbeData& data, int num_classes, const char* name) {
  if (data.size() == 0) return;
  if (data.features == nullptr) {
    throw DataError(std::string(name) + " data has no feature matrix");
  }
  if (data.labels.size() != data.rows.size()) {
    throw DataError(std::string(name) + " labels/rows size mismatch");
  }
  for (size_t i = 0; i < data.size(); ++i) {
    if (data.rows[i] >= static_cast<size_t>(data.features->rows())) {
      throw DataError(std::string(name) + " row index out of range");
    }
    if (data.labels[i] < 0 || data.labels[i] >= num_classes) {
      throw DataError(std::string(name) + " label id out of range");
    }
  }
}

}  // namespace

LossAndGradient softmax_cross_entropy(const Eigen::MatrixXd& weights,
                                      const Eigen::VectorXd& bias,
                                      const Eigen::MatrixXd& inputs,
                                      std::span<const int> labels) {
  const Eigen::Index n = inputs.rows();
  Eigen::MatrixXd logits = inputs * weights.transpose();
  logits.rowwise() += bias.transpose();
  const Eigen::MatrixXd log_probs = log_softmax_rows(logits);
  Eigen::MatrixXd residual = log_probs.array().exp();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss -= log_probs(i, labels[i]);
    residual(i, labels[i]) -= 1.0;
  }
  const double scale = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  LossAndGradient out;
  out.loss = loss * scale;
  out.grad_weights = residual.transpose() * inputs * scale;
  out.grad_bias = residual.colwise().sum().transpose() * scale;
  return out;
}

TrainResult train_probe(const ProbeData& train, const ProbeData& dev,
                        int num_classes, const TrainConfig& cfg, TaskKind task,
                        std::vector<std::string> label_map) {
  cfg.validate();
  if (train.size() == 0) throw DataError("empty training set");
  if (num_classes < 2) throw DataError("probe needs at least 2 classes");
  check_data(train, num_classes, "train");
  check_data(dev, num_classes, "dev");
  const Eigen::Index dim = train.features->cols();
  if (dev.size() > 0 && dev.features->cols() != dim) {
    throw DataError("train/dev feature width mismatch");
  }
  if (label_map.empty()) {
    for (int c = 0; c < num_classes; ++c) label_map.push_back(std::to_string(c));
  }

  ProbeModel model;
  model.task = task;
  model.label_map = std::move(label_map);
  model.weights = Eigen::MatrixXd::Zero(num_classes, dim);
  model.bias = Eigen::VectorXd::Zero(num_classes);

  Eigen::MatrixXd m_w = Eigen::MatrixXd::Zero(num_classes, dim);
  Eigen::MatrixXd v_w = m_w;
  Eigen::VectorXd m_b = Eigen::VectorXd::Zero(num_classes);
  Eigen::VectorXd v_b = m_b;

  const size_t n = train.size();
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  const size_t steps_per_epoch = (n + batch - 1) / batch;
  const size_t total_steps = steps_per_epoch * static_cast<size_t>(cfg.epochs);
  const auto warmup_steps = static_cast<size_t>(
      std::floor(cfg.warmup_fraction * static_cast<double>(total_steps)));

  Rng shuffle_rng(derive_seed(cfg.seed, "probe_shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "probe_dropout"));
  const double keep = 1.0 - cfg.dropout;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  TrainResult result;
  result.model = model;
  double best_f1 = -1.0;
  size_t step = 0;
  std::vector<int> batch_labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<size_t>(order));
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < n; begin += batch) {
      const size_t end = std::min(n, begin + batch);
      Eigen::MatrixXd inputs = gather(train, order, begin, end);
      if (cfg.dropout > 0.0) {
        for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
          for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
            inputs(i, j) =
                dropout_rng.uniform() < cfg.dropout ? 0.0 : inputs(i, j) / keep;
          }
        }
      }
      batch_labels.clear();
      for (size_t i = begin; i < end; ++i) {
        batch_labels.push_back(train.labels[order[i]]);
      }
      const LossAndGradient lg =
          softmax_cross_entropy(model.weights, model.bias, inputs, batch_labels);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", step "
            << step << " (batch of " << (end - begin)
            << "); max |W| = " << model.weights.cwiseAbs().maxCoeff();
        throw NumericError(msg.str());
      }
      loss_sum += lg.loss * static_cast<double>(end - begin);

      ++step;
      double lr = cfg.learning_rate;
      if (step <= warmup_steps) {
        lr *= static_cast<double>(step) / static_cast<double>(warmup_steps);
      }
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      // Decoupled weight decay, then the Adam step.
      model.weights *= 1.0 - lr * cfg.weight_decay;
      model.bias *= 1.0 - lr * cfg.weight_decay;
      m_w = cfg.beta1 * m_w + (1.0 - cfg.beta1) * lg.grad_weights;
      v_w = cfg.beta2 * v_w +
            (1.0 - cfg.beta2) * lg.grad_weights.cwiseProduct(lg.grad_weights);
      m_b = cfg.beta1 * m_b + (1.0 - cfg.beta1) * lg.grad_bias;
      v_b = cfg.beta2 * v_b +
            (1.0 - cfg.beta2) * lg.grad_bias.cwiseProduct(lg.grad_bias);
      model.weights.array() -=
          lr * (m_w.array() / c1) /
          ((v_w.array() / c2).sqrt() + cfg.epsilon);
      model.bias.array() -=
          lr * (m_b.array() / c1) / ((v_b.array() / c2).sqrt() + cfg.epsilon);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    if (dev.size() > 0) {
      const std::vector<int> pred = predict_all(model, dev);
      stats.dev_macro_f1 = score_predictions(pred, dev.labels, num_classes).macro_f1;
    }
    result.history.push_back(stats);
    const bool use_dev = cfg.select_on_dev && dev.size() > 0;
    if (!use_dev || stats.dev_macro_f1 > best_f1) {
      best_f1 = stats.dev_macro_f1;
      result.best_epoch = epoch;
      result.model.weights = model.weights;
      result.model.bias = model.bias;
    }
  }
  return result;
}

Prediction predict(const ProbeModel& model, std::span<const float> vector) {
  if (static_cast<int>(vector.size()) != model.input_dim()) {
    throw DataError("predict: vector has length " +
                    std::to_string(vector.size()) + ", model expects " +
                    std::to_string(model.input_dim()));
  }
  const Eigen::Map<const Eigen::VectorXf> v(
      vector.data(), static_cast<Eigen::Index>(vector.size()));
  Prediction p;
  p.scores = model.weights * v.cast<double>() + model.bias;
  p.label = 0;
  for (Eigen::Index c = 1; c < p.scores.size(); ++c) {
    if (p.scores[c] > p.scores[p.label]) p.label = static_cast<int>(c);
  }
  return p;
}

std::vector<int> predict_all(const ProbeModel& model, const ProbeData& data) {
  std::vector<int> out;
  out.reserve(data.size());
  if (data.size() == 0) return out;
  if (data.features->cols() != model.input_dim()) {
    throw DataError("predict: feature width does not match the model");
  }
  constexpr size_t kChunk = 1024;
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t begin = 0; begin < data.size(); begin += kChunk) {
    const size_t end = std::min(data.size(), begin + kChunk);
    Eigen::MatrixXd scores =
        gather(data, order, begin, end) * model.weights.transpose();
    scores.rowwise() += model.bias.transpose();
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      int best = 0;
      for (Eigen::Index c = 1; c < scores.cols(); ++c) {
        if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
      }
      out.push_back(best);
    }
  }
  return out;
}

double codelength_bits(const ProbeModel& model, const ProbeData& data) {
  if (data.size() == 0) return 0.0;
  constexpr size_t kChunk = 1024;
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  double nats = 0.0;
  for (size_t begin = 0; begin < data.size(); begin += kChunk) {
    const size_t end = std::min(data.size(), begin + kChunk);
    Eigen::MatrixXd logits =
        gather(data, order, begin, end) * model.weights.transpose();
    logits.rowwise() += model.bias.transpose();
    const Eigen::MatrixXd log_probs = log_softmax_rows(logits);
    for (size_t i = begin; i < end; ++i) {
      nats -= log_probs(static_cast<Eigen::Index>(i - begin), data.labels[i]);
    }
  }
  if (!std::isfinite(nats)) throw NumericError("non-finite codelength");
  return nats / std::log(2.0);
}

namespace {

constexpr char kProbeMagic[4] = {'P', 'R', 'B', 'M'};
constexpr uint32_t kProbeVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("truncated probe file");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_probe(const ProbeModel& model, const std::filesystem::path& path) {
  std::string out(kProbeMagic, 4);
  put<uint32_t>(out, kProbeVersion);
  put<uint32_t>(out, static_cast<uint32_t>(model.num_classes()));
  put<uint32_t>(out, static_cast<uint32_t>(model.input_dim()));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) {
      put<double>(out, model.weights(r, c));
    }
  }
  for (Eigen::Index r = 0; r < model.bias.size(); ++r) {
    put<double>(out, model.bias[r]);
  }
  const std::string trailer =
      nlohmann::json{{"task", task_name(model.task)},
                     {"labels", model.label_map}}
          .dump();
  put<uint32_t>(out, static_cast<uint32_t>(trailer.size()));
  out += trailer;
  write_file_atomic(path, out);
}

ProbeModel load_probe(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.size() < 4 || std::memcmp(in.data(), kProbeMagic, 4) != 0) {
    throw DataError(path.string() + ": bad magic, not a PRBM file");
  }
  size_t pos = 4;
  if (take<uint32_t>(in, pos) != kProbeVersion) {
    throw DataError(path.string() + ": unsupported PRBM version");
  }
  const auto k = take<uint32_t>(in, pos);
  const auto d = take<uint32_t>(in, pos);
  ProbeModel model;
  model.weights.resize(k, d);
  model.bias.resize(k);
  for (uint32_t r = 0; r < k; ++r) {
    for (uint32_t c = 0; c < d; ++c) model.weights(r, c) = take<double>(in, pos);
  }
  for (uint32_t r = 0; r < k; ++r) model.bias[r] = take<double>(in, pos);
  const auto length = take<uint32_t>(in, pos);
  if (pos + length != in.size()) throw DataError("truncated probe trailer");
  try {
    const auto trailer = nlohmann::json::parse(in.substr(pos));
    model.task = parse_task(trailer.at("task").get<std::string>());
    model.label_map = trailer.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad probe trailer: " + e.what());
  }
  return model;
}

}  // namespace topicprobe
