// Copyright 2026 The plre Authors.
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

#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "plre/corpus.hpp"

namespace plre {

/// A conditional word distribution P(w | context). Contexts are passed
/// most-recent-word-first; histories longer than order()-1 are truncated and
/// shorter ones select the corresponding lower order.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t order() const = 0;
  virtual const Vocabulary& vocab() const = 0;
  virtual double prob(WordId word, std::span<const WordId> context) const = 0;
  virtual std::string name() const = 0;
};

/// Ids that can be predicted: every vocabulary entry except bos.
inline bool is_predictable(const Vocabulary& vocab, WordId w) {
  return w != vocab.bos_id() && w < vocab.size();
}

/// Drops the oldest word of each key: the order-(n-1) marginal table.
inline CountTable marginalize(const CountTable& table) {
  if (table.order() < 2)
    fail(ErrorCode::kInvalidArgument, "cannot marginalize a unigram table");
  CountTable out(table.order() - 1);
  for (const auto& [key, c] : table.entries()) out.add(key.drop_oldest(), c);
  return out;
}

/// Raw tables for orders 1..n (index k-1 holds order k) from the top table.
inline std::vector<CountTable> raw_tables(const CountTable& top) {
  std::vector<CountTable> tables(top.order());
  tables.back() = top;
  for (std::size_t k = top.order() - 1; k >= 1; --k) tables[k - 1] = marginalize(tables[k]);
  return tables;
}

/// Unigram base distribution over predictable words, proportional to
/// `weights`. Predictable words with zero weight (e.g. unk when no token was
/// replaced) receive mass from a uniform floor mixed in with weight
/// zeros / (sum + zeros); without such words the floor is inactive and the
/// distribution is exactly weights / sum.
class UnigramBase {
 public:
  UnigramBase() = default;
  UnigramBase(const Vocabulary& vocab, const CountTable& unigram) {
    const std::size_t v = vocab.size();
    probs_.assign(v, 0.0);
    double sum = 0.0;
    std::size_t zeros = 0, predictable = 0;
    for (WordId w = 0; w < v; ++w) {
      if (!is_predictable(vocab, w)) continue;
      ++predictable;
      Count c = unigram.count(NgramKey{w});
      sum += static_cast<double>(c);
      zeros += c == 0;
    }
    if (sum <= 0.0) fail(ErrorCode::kEmptyInput, "unigram base has no mass");
    floor_ = zeros == 0 ? 0.0 : static_cast<double>(zeros) / (sum + zeros);
    for (WordId w = 0; w < v; ++w) {
      if (!is_predictable(vocab, w)) continue;
      double p = static_cast<double>(unigram.count(NgramKey{w})) / sum;
      probs_[w] = (1.0 - floor_) * p + floor_ / static_cast<double>(predictable);
    }
  }
  double operator()(WordId w) const { return w < probs_.size() ? probs_[w] : 0.0; }
  double floor_weight() const noexcept { return floor_; }
  const std::vector<double>& probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
  double floor_ = 0.0;
};

}  // namespace plre
