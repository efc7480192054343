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

#ifndef TOPICPROBE_TOPICSPEC_H_
#define TOPICPROBE_TOPICSPEC_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topicprobe/corpus.h"

namespace topicprobe {

// Token x topic occurrence counts over case-folded tokens.
class TopicOddsTable {
 public:
  TopicOddsTable(std::vector<std::string> tokens,
                 std::vector<std::string> topics,
                 std::vector<int64_t> counts, double alpha);

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& topics() const { return topics_; }
  double alpha() const { return alpha_; }
  // Throws DataError for an unknown token.
  size_t token_index(std::string_view token) const;
  bool contains(std::string_view token) const;
  int64_t count(size_t token, size_t topic) const {
    return counts_[token * topics_.size() + topic];
  }
  int64_t topic_total(size_t topic) const { return totals_[topic]; }

 private:
  std::vector<std::string> tokens_;  // sorted
  std::vector<std::string> topics_;
  std::vector<int64_t> counts_;      // row-major tokens x topics
  std::vector<int64_t> totals_;
  double alpha_;
  std::unordered_map<std::string, size_t> index_;
};

// Counts every sentence token. Topics keep the corpus' first-occurrence
// order. Throws DataError for an empty or single-topic corpus.
TopicOddsTable build_counts(const Corpus& corpus, double alpha = 1.0);

struct SpecificityScore {
  std::string token;
  double r = 0.0;
  std::string argmax_topic;
};

// r = max_t ln( o(w,t) / o(w,not t) ) with additively smoothed odds
// o(w,t) = (n(w,t) + a) / (n(not w,t) + a), the complement pooled over all
// other topics. Ties in the max keep the earliest topic.
SpecificityScore specificity(const TopicOddsTable& table,
                             std::string_view token);
std::vector<SpecificityScore> score_all(const TopicOddsTable& table);

enum class SpecBin { kLow, kMedium, kHigh };
std::string_view bin_name(SpecBin bin);

enum class Binning { kEqualFrequency, kEqualWidth };
Binning parse_binning(std::string_view name);

struct TokenBin {
  std::string token;
  SpecBin bin;
};

struct BinResult {
  std::vector<TokenBin> bins;  // ordered by (r, token)
  bool degenerate = false;     // fewer than 3 distinct scores: all MEDIUM
};

// Terciles over token types ordered by (r, token). Throws DataError for
// fewer than 3 tokens.
BinResult bin_tokens(std::span<const SpecificityScore> scores,
                     Binning binning = Binning::kEqualFrequency);

// One TOPICSPEC instance per token occurrence, labelled with its type's bin.
// Label set is fixed to low/medium/high. When max_instances > 0 a seeded
// uniform subsample of that size is kept (in corpus order).
TaskDataset make_topicspec_dataset(const BinResult& bins,
                                   std::shared_ptr<const Corpus> corpus,
                                   size_t max_instances = 0,
                                   uint64_t seed = 0);

// CSV with header token,r,argmax_topic,bin.
std::string scores_csv(std::span<const SpecificityScore> scores,
                       const BinResult& bins);

}  // namespace topicprobe

#endif  // TOPICPROBE_TOPICSPEC_H_
