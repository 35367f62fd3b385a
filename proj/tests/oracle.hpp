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

// Independent reference implementations used as test oracles. They work on
// plain std::map tables keyed oldest-word-first, rebuild every statistic by
// brute force and share no code with the library beyond the Vocabulary.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace plre::testing {

using Gram = std::vector<int>;  // oldest word first
using GramTable = std::map<Gram, long>;

struct OracleCounts {
  int order = 0;
  std::vector<GramTable> raw;  // raw[k] holds k-grams, k = 1..order
  int vocab_size = 0;
  int bos = 1;
};

/// Counts every k-gram ending at a predicted position of the padded
/// sentences (order-1 bos symbols, one eos).
inline OracleCounts oracle_counts(const std::vector<std::vector<int>>& sentences, int order,
                                  int vocab_size, int bos = 1, int eos = 2) {
  OracleCounts oc;
  oc.order = order;
  oc.raw.resize(order + 1);
  oc.vocab_size = vocab_size;
  oc.bos = bos;
  for (const auto& s : sentences) {
    std::vector<int> p(order - 1, bos);
    p.insert(p.end(), s.begin(), s.end());
    p.push_back(eos);
    for (int i = order - 1; i < static_cast<int>(p.size()); ++i)
      for (int k = 1; k <= order; ++k) oc.raw[k][Gram(p.begin() + i - k + 1, p.begin() + i + 1)]++;
  }
  return oc;
}

/// Number of distinct left extensions x of each gram g with (x, g) in `longer`.
inline GramTable left_extensions(const GramTable& longer) {
  GramTable out;
  for (const auto& [g, c] : longer)
    if (c > 0) out[Gram(g.begin() + 1, g.end())]++;
  return out;
}

inline double oracle_gt(long n1, long n2) {
  if (n1 + 2 * n2 == 0) return 0.5;
  double d = double(n1) / double(n1 + 2 * n2);
  return d < 0.01 ? 0.01 : (d > 0.99 ? 0.99 : d);
}

struct OracleLM {
  enum Kind { kMle, kAbs, kKn, kMkn };
  Kind kind = kKn;
  int order = 0;
  int vocab_size = 0;
  int bos = 1;
  std::vector<GramTable> base;             // base[k], k = 1..order
  std::vector<std::vector<double>> disc;   // disc[k] = {D1, D2, D3+}
  std::vector<double> unigram;             // by word id

  long count(int k, const Gram& g) const {
    auto it = base[k].find(g);
    return it == base[k].end() ? 0 : it->second;
  }

  double prob(int w, const Gram& history) const { return prob_at(order, w, history); }

  double prob_at(int k, int w, const Gram& history) const {
    if (k == 1) return unigram[w];
    Gram h(history.end() - (k - 1), history.end());
    long total = 0, n[4] = {0, 0, 0, 0};
    for (int v = 0; v < vocab_size; ++v) {
      Gram g = h;
      g.push_back(v);
      long c = count(k, g);
      total += c;
      if (c > 0) n[std::min<long>(c, 3)]++;
    }
    if (total == 0) return prob_at(k - 1, w, history);
    Gram g = h;
    g.push_back(w);
    long c = count(k, g);
    const auto& d = disc[k];
    double dc = c == 0 ? 0.0 : d[std::min<long>(c, 3) - 1];
    double leftover = d[0] * n[1] + d[1] * n[2] + d[2] * n[3];
    return std::max(double(c) - dc, 0.0) / double(total) +
           leftover / double(total) * prob_at(k - 1, w, history);
  }
};

/// Unigram base proportional to `weights` over predictable ids (all but
/// bos), with a uniform floor of weight zeros / (sum + zeros) when some
/// predictable id has zero weight.
inline std::vector<double> oracle_unigram(const GramTable& weights, int vocab_size, int bos) {
  double sum = 0.0;
  int zeros = 0, predictable = 0;
  std::vector<double> raw(vocab_size, 0.0);
  for (int w = 0; w < vocab_size; ++w) {
    if (w == bos) continue;
    ++predictable;
    auto it = weights.find(Gram{w});
    raw[w] = it == weights.end() ? 0.0 : double(it->second);
    sum += raw[w];
    if (raw[w] == 0.0) ++zeros;
  }
  double floor = zeros ? double(zeros) / (sum + zeros) : 0.0;
  std::vector<double> p(vocab_size, 0.0);
  for (int w = 0; w < vocab_size; ++w)
    if (w != bos) p[w] = (1.0 - floor) * raw[w] / sum + floor / predictable;
  return p;
}

inline OracleLM oracle_lm(const OracleCounts& oc, OracleLM::Kind kind,
                          double fixed_discount = -1.0) {
  OracleLM lm;
  lm.kind = kind;
  lm.order = oc.order;
  lm.vocab_size = oc.vocab_size;
  lm.bos = oc.bos;
  lm.base.resize(oc.order + 1);
  lm.disc.assign(oc.order + 1, {0.0, 0.0, 0.0});
  bool continuation = kind == OracleLM::kKn || kind == OracleLM::kMkn;
  for (int k = 1; k <= oc.order; ++k)
    lm.base[k] = continuation && k < oc.order ? left_extensions(oc.raw[k + 1]) : oc.raw[k];
  for (int k = 2; k <= oc.order; ++k) {
    long n[5] = {0, 0, 0, 0, 0};
    for (const auto& [g, c] : lm.base[k])
      if (c <= 4) n[c]++;
    if (kind == OracleLM::kMle) continue;
    double y = oracle_gt(n[1], n[2]);
    if (fixed_discount >= 0.0) y = fixed_discount;
    if (kind == OracleLM::kMkn && fixed_discount < 0.0) {
      for (int j = 1; j <= 3; ++j) {
        double dj = n[j] > 0 ? j - (j + 1) * y * double(n[j + 1]) / double(n[j]) : y;
        lm.disc[k][j - 1] = std::clamp(dj, 0.0, double(j));
      }
    } else {
      lm.disc[k] = {y, y, y};
    }
  }
  lm.unigram = oracle_unigram(lm.base[1], oc.vocab_size, oc.bos);
  return lm;
}

/// Two-level power chain {1, 0.5, 0} at every order with per-slice
/// closed-form rank-1 (full_rank = false) or exact (full_rank = true)
/// low-rank terms. Slices are keyed by the history minus its oldest word,
/// columns by the oldest word.
struct OraclePlre {
  int order = 0;
  int vocab_size = 0;
  int bos = 1;
  bool full_rank = false;
  std::vector<GramTable> base;
  std::vector<double> dstar;
  std::vector<double> unigram;
  // Per order: Z(w, h) keyed by (h..., w).
  std::vector<std::map<Gram, double>> z;

  double prob(int w, const Gram& history) const { return prob_at(order, w, history); }

  double prob_at(int k, int w, const Gram& history) const {
    if (k == 1) return unigram[w];
    Gram h(history.end() - (k - 1), history.end());
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int v = 0; v < vocab_size; ++v) {
      Gram g = h;
      g.push_back(v);
      auto it = base[k].find(g);
      if (it == base[k].end()) continue;
      s0 += double(it->second);
      s1 += std::sqrt(double(it->second));
      s2 += 1.0;
    }
    if (s0 == 0.0) return prob_at(k - 1, w, history);
    Gram g = h;
    g.push_back(w);
    auto it = base[k].find(g);
    double c = it == base[k].end() ? 0.0 : double(it->second);
    double d = dstar[k];
    double g0 = d * s1 / s0, g1 = d * s2 / s1;
    double sparse = c > 0 ? (c - d * std::sqrt(c)) / s0 : 0.0;
    auto zt = z[k].find(g);
    double zv = zt == z[k].end() ? 0.0 : zt->second;
    return sparse + g0 * zv / s1 + g0 * g1 * prob_at(k - 1, w, history);
  }
};

inline OraclePlre oracle_plre(const OracleCounts& oc, bool full_rank) {
  OraclePlre m;
  m.order = oc.order;
  m.vocab_size = oc.vocab_size;
  m.bos = oc.bos;
  m.full_rank = full_rank;
  m.base.resize(oc.order + 1);
  m.dstar.assign(oc.order + 1, 0.0);
  m.z.resize(oc.order + 1);
  for (int k = 1; k <= oc.order; ++k)
    m.base[k] = k < oc.order ? left_extensions(oc.raw[k + 1]) : oc.raw[k];
  for (int k = 2; k <= oc.order; ++k) {
    long n1 = 0, n2 = 0;
    for (const auto& [g, c] : m.base[k]) {
      n1 += c == 1;
      n2 += c == 2;
    }
    double d = std::sqrt(oracle_gt(n1, n2));
    m.dstar[k] = d;
    // discounted powered entries, keyed (h..., w) with h oldest first
    std::map<Gram, double> mv;
    for (const auto& [g, c] : m.base[k]) mv[g] = std::sqrt(double(c)) - d;
    if (full_rank) {
      m.z[k] = mv;
      continue;
    }
    // slice = g[1 .. k-2] (interior), column = g[0] (oldest), row = g.back()
    std::map<Gram, std::map<int, double>> row_sum, col_sum;
    std::map<Gram, double> slice_total;
    for (const auto& [g, v] : mv) {
      Gram interior(g.begin() + 1, g.end() - 1);
      row_sum[interior][g.back()] += v;
      col_sum[interior][g.front()] += v;
      slice_total[interior] += v;
    }
    for (const auto& [interior, rows] : row_sum)
      for (const auto& [col, cv] : col_sum[interior])
        for (const auto& [row, rv] : rows) {
          Gram g{col};
          g.insert(g.end(), interior.begin(), interior.end());
          g.push_back(row);
          m.z[k][g] = rv * cv / slice_total[interior];
        }
  }
  m.unigram = oracle_unigram(m.base[1], oc.vocab_size, oc.bos);
  return m;
}

}  // namespace plre::testing
