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

// Brute-force reference implementations. They share no code with the
// library and favour obviousness over speed.

#ifndef TOPICPROBE_TESTS_ORACLES_H_
#define TOPICPROBE_TESTS_ORACLES_H_

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace topicprobe::oracle {

inline std::vector<std::vector<int64_t>> confusion(
    const std::vector<int>& pred, const std::vector<int>& gold, int k) {
  std::vector<std::vector<int64_t>> m(k, std::vector<int64_t>(k, 0));
  for (int g = 0; g < k; ++g) {
    for (int p = 0; p < k; ++p) {
      for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == g && pred[i] == p) ++m[g][p];
      }
    }
  }
  return m;
}

inline double macro_f1(const std::vector<int>& pred,
                       const std::vector<int>& gold, int k) {
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < k; ++c) {
    int tp = 0, fp = 0, fn = 0;
    bool present = false;
    for (size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == c || pred[i] == c) present = true;
      if (gold[i] == c && pred[i] == c) ++tp;
      if (gold[i] != c && pred[i] == c) ++fp;
      if (gold[i] == c && pred[i] != c) ++fn;
    }
    if (!present) continue;
    ++classes;
    sum += tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
  }
  return classes == 0 ? 0.0 : sum / classes;
}

// Rank = 1 + (#smaller) + (#equal others) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double smaller = 0, equal = 0;
    for (size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) ++smaller;
      if (j != i && x[j] == x[i]) ++equal;
    }
    r[i] = 1.0 + smaller + equal / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& a,
                      const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// Mean softmax cross-entropy computed one example at a time.
inline double cross_entropy(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                            const Eigen::MatrixXd& x,
                            const std::vector<int>& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> z(w.rows());
    double zmax = -INFINITY;
    for (Eigen::Index c = 0; c < w.rows(); ++c) {
      z[c] = b[c];
      for (Eigen::Index d = 0; d < w.cols(); ++d) z[c] += w(c, d) * x(i, d);
      zmax = std::max(zmax, z[c]);
    }
    double norm = 0.0;
    for (double v : z) norm += std::exp(v - zmax);
    total -= z[y[i]] - zmax - std::log(norm);
  }
  return total / static_cast<double>(x.rows());
}

// Central differences of `f` at every entry of `m`.
inline Eigen::MatrixXd numeric_gradient(
    Eigen::MatrixXd m, const std::function<double(const Eigen::MatrixXd&)>& f,
    double h = 1e-5) {
  Eigen::MatrixXd g(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double saved = m(r, c);
      m(r, c) = saved + h;
      const double up = f(m);
      m(r, c) = saved - h;
      const double down = f(m);
      m(r, c) = saved;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace topicprobe::oracle

#endif  // TOPICPROBE_TESTS_ORACLES_H_
