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

// Seeded generators for property tests.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "plre/corpus.hpp"
#include "plre/factorization.hpp"

namespace plre::testing {

/// Sentences over a Zipf-distributed vocabulary of `types` words, plus a
/// sprinkling of one-off tokens so that unk replacement has work to do.
inline std::vector<Sentence> random_corpus(std::uint64_t seed, std::size_t sentences,
                                           std::size_t types, double zipf = 1.1,
                                           double rare_rate = 0.01) {
  std::mt19937_64 rng(seed);
  std::vector<double> weights(types);
  for (std::size_t i = 0; i < types; ++i) weights[i] = 1.0 / std::pow(double(i + 1), zipf);
  std::discrete_distribution<std::size_t> word(weights.begin(), weights.end());
  std::uniform_int_distribution<std::size_t> length(1, 12);
  std::bernoulli_distribution rare(rare_rate);
  // A first-order Markov flavour: half of the tokens reuse a word tied to
  // the previous one, so contexts carry information.
  std::bernoulli_distribution follow(0.5);
  std::vector<Sentence> out;
  std::size_t rare_id = 0;
  for (std::size_t s = 0; s < sentences; ++s) {
    Sentence sent;
    std::size_t n = length(rng);
    std::size_t prev = word(rng);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t w = follow(rng) ? (prev * 7 + 3) % types : word(rng);
      if (rare(rng))
        sent.push_back("rare" + std::to_string(rare_id++));
      else
        sent.push_back("w" + std::to_string(w));
      prev = w;
    }
    out.push_back(std::move(sent));
  }
  return out;
}

inline std::size_t token_count(const std::vector<Sentence>& sentences) {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

/// Random sparse nonnegative matrix with density `density`; every row and
/// column receives at least one entry.
inline SparseMatrix random_sparse(std::uint64_t seed, std::size_t rows, std::size_t cols,
                                  double density, double scale = 10.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> dense(rows, std::vector<double>(cols, 0.0));
  auto value = [&] { return std::floor(u(rng) * scale) + 1.0; };
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (u(rng) < density) dense[i][j] = value();
  for (std::size_t i = 0; i < rows; ++i) dense[i][(i * 5 + 1) % cols] = value();
  for (std::size_t j = 0; j < cols; ++j) dense[(j * 3 + 2) % rows][j] = value();
  return SparseMatrix::from_dense(dense);
}

/// M = sum of `rank` nonnegative outer products; dense.
inline SparseMatrix random_low_rank(std::uint64_t seed, std::size_t rows, std::size_t cols,
                                    std::size_t rank) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::vector<std::vector<double>> l(rows, std::vector<double>(rank)),
      r(rank, std::vector<double>(cols));
  for (auto& row : l)
    for (double& x : row) x = u(rng);
  for (auto& row : r)
    for (double& x : row) x = u(rng);
  std::vector<std::vector<double>> dense(rows, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t k = 0; k < rank; ++k) dense[i][j] += l[i][k] * r[k][j];
  return SparseMatrix::from_dense(dense);
}

}  // namespace plre::testing
