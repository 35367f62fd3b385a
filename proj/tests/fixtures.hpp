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

// Shared fixtures: toy corpora, count tables and model builders.

#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plre/baselines.hpp"
#include "plre/corpus.hpp"
#include "plre/plre.hpp"

#include "oracle.hpp"

#ifndef PLRE_TEST_DATA_DIR
#define PLRE_TEST_DATA_DIR "tests/data"
#endif

namespace plre::testing {

inline std::string data_path(const std::string& name) {
  return std::string(PLRE_TEST_DATA_DIR) + "/" + name;
}

struct Toy {
  Vocabulary vocab;
  std::vector<IdSentence> ids;     ///< unpadded
  std::vector<IdSentence> padded;  ///< for `order`
  CountTable top;
  std::size_t order = 0;

  OracleCounts oracle() const {
    std::vector<std::vector<int>> s;
    for (const auto& ids_ : ids) s.emplace_back(ids_.begin(), ids_.end());
    return oracle_counts(s, static_cast<int>(order), static_cast<int>(vocab.size()),
                         static_cast<int>(vocab.bos_id()), static_cast<int>(vocab.eos_id()));
  }
};

inline Toy make_toy(const std::vector<Sentence>& sentences, std::size_t order,
                    Count unk_threshold = 1) {
  Toy t;
  t.order = order;
  t.vocab = build_vocabulary(sentences, unk_threshold);
  for (const auto& s : sentences) t.ids.push_back(map_sentence(t.vocab, s));
  for (const auto& s : t.ids) t.padded.push_back(pad_sentence(s, order));
  t.top = count_ngrams(t.padded, order);
  return t;
}

inline const std::vector<Sentence>& toy_train() {
  static const std::vector<Sentence> s = read_sentences(data_path("toy_train.txt"));
  return s;
}

inline const std::vector<Sentence>& toy_test() {
  static const std::vector<Sentence> s = read_sentences(data_path("toy_test.txt"));
  return s;
}

inline NgramLM make_ngram(const Toy& t, Smoother s) {
  NgramOptions o;
  o.smoother = s;
  return NgramLM(t.vocab, t.top, o);
}

/// PLRE with one intermediate level at 0.5 for every order and the given rank.
inline PlreModel make_plre(const Toy& t, double rank, std::uint64_t seed = 1,
                           NmfOptions nmf = {}) {
  PlreConfig c;
  c.order = t.order;
  for (std::size_t k = 2; k <= t.order; ++k) {
    c.powers[k] = {0.5};
    c.ranks[k] = {rank};
  }
  c.nmf = nmf;
  c.seed = seed;
  return build_plre(t.vocab, t.top, c);
}

/// PLRE without intermediate levels.
inline PlreModel make_plre_eta0(const Toy& t) {
  PlreConfig c;
  c.order = t.order;
  for (std::size_t k = 2; k <= t.order; ++k) c.powers[k] = {};
  return build_plre(t.vocab, t.top, c);
}

/// Library contexts are most-recent first; oracle histories are oldest first.
inline Gram to_history(std::span<const WordId> context) {
  Gram g(context.rbegin(), context.rend());
  return g;
}

}  // namespace plre::testing
