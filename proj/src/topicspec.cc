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

#include "topicprobe/topicspec.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "topicprobe/error.h"
#include "topicprobe/random.h"
#include "topicprobe/util.h"

namespace topicprobe {

TopicOddsTable::TopicOddsTable(std::vector<std::string> tokens,
                               std::vector<std::string> topics,
                               std::vector<int64_t> counts, double alpha)
    : tokens_(std::move(tokens)),
      topics_(std::move(topics)),
      counts_(std::move(counts)),
      totals_(topics_.size(), 0),
      alpha_(alpha) {
  if (counts_.size() != tokens_.size() * topics_.size()) {
    throw DataError("count table has the wrong shape");
  }
  if (!(alpha_ > 0.0)) throw ConfigError("smoothing alpha must be > 0");
  for (size_t w = 0; w < tokens_.size(); ++w) {
    index_.emplace(tokens_[w], w);
    for (size_t t = 0; t < topics_.size(); ++t) {
      if (count(w, t) < 0) throw DataError("negative count");
      totals_[t] += count(w, t);
    }
  }
}

size_t TopicOddsTable::token_index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) {
    throw DataError("unknown token '" + std::string(token) + "'");
  }
  return it->second;
}

bool TopicOddsTable::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

TopicOddsTable build_counts(const Corpus& corpus, double alpha) {
  if (corpus.size() == 0) throw DataError("cannot count an empty corpus");
  const std::vector<std::string>& topics = corpus.topics();
  if (topics.size() < 2) {
    throw DataError("topic specificity needs at least 2 topics");
  }
  std::map<std::string, int> topic_index;
  for (size_t t = 0; t < topics.size(); ++t) {
    topic_index.emplace(topics[t], static_cast<int>(t));
  }
  std::map<std::string, std::vector<int64_t>> per_token;
  for (const Sentence& s : corpus.sentences()) {
    const int t = topic_index.at(s.topic);
    for (const std::string& token : s.tokens) {
      auto& row = per_token[to_lower(token)];
      if (row.empty()) row.assign(topics.size(), 0);
      ++row[t];
    }
  }
  std::vector<std::string> tokens;
  std::vector<int64_t> counts;
  tokens.reserve(per_token.size());
  counts.reserve(per_token.size() * topics.size());
  for (auto& [token, row] : per_token) {
    tokens.push_back(token);
    counts.insert(counts.end(), row.begin(), row.end());
  }
  return TopicOddsTable(std::move(tokens), topics, std::move(counts), alpha);
}

namespace {

SpecificityScore score_index(const TopicOddsTable& table, size_t w) {
  const size_t m = table.topics().size();
  const double a = table.alpha();
  int64_t token_total = 0;
  int64_t grand_total = 0;
  for (size_t t = 0; t < m; ++t) {
    token_total += table.count(w, t);
    grand_total += table.topic_total(t);
  }
  SpecificityScore best;
  best.token = table.tokens()[w];
  bool first = true;
  for (size_t t = 0; t < m; ++t) {
    const double in_topic = static_cast<double>(table.count(w, t));
    const double others_in_topic =
        static_cast<double>(table.topic_total(t)) - in_topic;
    const double out_topic = static_cast<double>(token_total) - in_topic;
    const double others_out_topic =
        static_cast<double>(grand_total - table.topic_total(t)) - out_topic;
    const double odds_in = (in_topic + a) / (others_in_topic + a);
    const double odds_out = (out_topic + a) / (others_out_topic + a);
    const double r = std::log(odds_in / odds_out);
    if (first || r > best.r) {
      best.r = r;
      best.argmax_topic = table.topics()[t];
      first = false;
    }
  }
  return best;
}

}  // namespace

SpecificityScore specificity(const TopicOddsTable& table,
                             std::string_view token) {
  return score_index(table, table.token_index(token));
}

std::vector<SpecificityScore> score_all(const TopicOddsTable& table) {
  std::vector<SpecificityScore> out;
  out.reserve(table.tokens().size());
  for (size_t w = 0; w < table.tokens().size(); ++w) {
    out.push_back(score_index(table, w));
  }
  return out;
}

std::string_view bin_name(SpecBin bin) {
  switch (bin) {
    case SpecBin::kLow:
      return "low";
    case SpecBin::kMedium:
      return "medium";
    case SpecBin::kHigh:
      return "high";
  }
  return "?";
}

Binning parse_binning(std::string_view name) {
  const std::string lower = to_lower(name);
  if (lower == "frequency" || lower == "equal-frequency") {
    return Binning::kEqualFrequency;
  }
  if (lower == "width" || lower == "equal-width") return Binning::kEqualWidth;
  throw ConfigError("unknown binning '" + std::string(name) + "'");
}

BinResult bin_tokens(std::span<const SpecificityScore> scores,
                     Binning binning) {
  if (scores.size() < 3) {
    throw DataError("binning needs at least 3 scored tokens");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a].r != scores[b].r) return scores[a].r < scores[b].r;
    return scores[a].token < scores[b].token;
  });
  size_t distinct = 1;
  for (size_t i = 1; i < order.size(); ++i) {
    if (scores[order[i]].r != scores[order[i - 1]].r) ++distinct;
  }
  BinResult result;
  result.bins.reserve(order.size());
  if (distinct < 3) {
    std::cerr << "warning: fewer than 3 distinct specificity scores; all "
                 "tokens binned as medium\n";
    result.degenerate = true;
    for (size_t i : order) result.bins.push_back({scores[i].token, SpecBin::kMedium});
    return result;
  }
  const size_t n = order.size();
  const double lo = scores[order.front()].r;
  const double hi = scores[order.back()].r;
  for (size_t rank = 0; rank < n; ++rank) {
    const SpecificityScore& s = scores[order[rank]];
    int bin;
    if (binning == Binning::kEqualFrequency) {
      bin = static_cast<int>((3 * rank) / n);
    } else {
      bin = static_cast<int>(std::floor(3.0 * (s.r - lo) / (hi - lo)));
      bin = std::clamp(bin, 0, 2);
    }
    result.bins.push_back({s.token, static_cast<SpecBin>(bin)});
  }
  return result;
}

TaskDataset make_topicspec_dataset(const BinResult& bins,
                                   std::shared_ptr<const Corpus> corpus,
                                   size_t max_instances, uint64_t seed) {
  std::unordered_map<std::string, SpecBin> bin_of;
  for (const TokenBin& b : bins.bins) bin_of.emplace(b.token, b.bin);
  std::vector<Instance> instances;
  for (const Sentence& s : corpus->sentences()) {
    for (size_t i = 0; i < s.tokens.size(); ++i) {
      auto it = bin_of.find(to_lower(s.tokens[i]));
      if (it == bin_of.end()) {
        throw DataError("token '" + s.tokens[i] + "' has no specificity bin");
      }
      Instance inst;
      inst.instance_id = "ts:" + s.sentence_id + ":" + std::to_string(i);
      inst.task = TaskKind::kTopicSpec;
      inst.sentence_id = s.sentence_id;
      inst.positions = {{static_cast<uint32_t>(i)}};
      inst.label = bin_name(it->second);
      inst.topic = s.topic;
      instances.push_back(std::move(inst));
    }
  }
  if (max_instances > 0 && instances.size() > max_instances) {
    std::vector<size_t> keep(instances.size());
    std::iota(keep.begin(), keep.end(), size_t{0});
    Rng rng(derive_seed(seed, "topicspec_subsample"));
    rng.shuffle(std::span<size_t>(keep));
    keep.resize(max_instances);
    std::sort(keep.begin(), keep.end());
    std::vector<Instance> kept;
    kept.reserve(max_instances);
    for (size_t i : keep) kept.push_back(std::move(instances[i]));
    instances = std::move(kept);
  }
  return TaskDataset(TaskKind::kTopicSpec, std::move(instances),
                     std::move(corpus), {"low", "medium", "high"});
}

std::string scores_csv(std::span<const SpecificityScore> scores,
                       const BinResult& bins) {
  std::unordered_map<std::string, SpecBin> bin_of;
  for (const TokenBin& b : bins.bins) bin_of.emplace(b.token, b.bin);
  std::ostringstream out;
  out << "token,r,argmax_topic,bin\n";
  const auto quote = [](const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string q = "\"";
    for (char c : field) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    q.push_back('"');
    return q;
  };
  for (const SpecificityScore& s : scores) {
    auto it = bin_of.find(s.token);
    out << quote(s.token) << ',' << format_double(s.r) << ','
        << quote(s.argmax_topic) << ','
        << (it == bin_of.end() ? "" : bin_name(it->second)) << '\n';
  }
  return out.str();
}

}  // namespace topicprobe
