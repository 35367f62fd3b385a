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

// Invariant checks for built models: normalization, the marginal constraint,
// per-level discount identities, the leftover-weight closed form and the
// Kneser-Ney reduction.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "plre/baselines.hpp"
#include "plre/plre.hpp"

namespace plre {

struct CheckResult {
  std::string name;
  double value = 0.0;      ///< measured maximum violation
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

/// Sum over predictable words of P(w | context).
inline double total_mass(const LanguageModel& model, std::span<const WordId> context) {
  std::vector<double> p;
  p.reserve(model.vocab().size());
  for (WordId w = 0; w < model.vocab().size(); ++w)
    if (is_predictable(model.vocab(), w)) p.push_back(model.prob(w, context));
  return pairwise_sum(p);
}

/// Observed contexts of the top-order table, in key order.
inline std::vector<NgramKey> observed_contexts(const CountTable& table) {
  std::vector<NgramKey> out;
  out.reserve(table.context_sums().size());
  for (const auto& entry : table.context_sums()) out.push_back(entry.first);
  std::sort(out.begin(), out.end());
  return out;
}

/// Random contexts of the given length that are absent from `table`.
inline std::vector<NgramKey> unseen_contexts(const CountTable& table, std::size_t length,
                                             std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<NgramKey> out;
  std::vector<WordId> ids;
  for (const auto& entry : table.entries())
    for (WordId id : entry.first.view()) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.empty() || length == 0) return out;
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  for (std::size_t attempt = 0; out.size() < count && attempt < count * 1000; ++attempt) {
    NgramKey h;
    for (std::size_t i = 0; i < length; ++i) h.push_back(ids[pick(rng)]);
    if (table.context_sum(h) == 0) out.push_back(h);
  }
  return out;
}

/// max |1 - sum_w P(w | h)| over the given contexts.
inline double max_normalization_error(const LanguageModel& model,
                                      const std::vector<NgramKey>& contexts) {
  double worst = 0.0;
  for (const auto& h : contexts) worst = std::max(worst, std::abs(1.0 - total_mass(model, h.view())));
  return worst;
}

/// Weights and targets of the order-k marginal constraint: contexts are
/// weighted by c~_k(h) / T_k and the target is sum_h c~_k(w, h) / T_k.
struct MarginalProblem {
  const CountTable* base = nullptr;
  double total = 0.0;
  std::vector<double> target;  ///< by word id
};

inline MarginalProblem marginal_problem(const PlreModel& model, std::size_t k) {
  if (k < 2 || k > model.order())
    fail(ErrorCode::kInvalidArgument, "marginal check needs 2 <= order <= model order");
  MarginalProblem p;
  p.base = &model.level(k).base;
  p.total = static_cast<double>(p.base->total());
  p.target.assign(model.vocab().size(), 0.0);
  for (const auto& [key, c] : p.base->entries())
    p.target[key.front()] += static_cast<double>(c) / p.total;
  return p;
}

/// Brute force: max_w |target(w) - sum_h P_k(w | h) P(h)| over every observed
/// order-k context and every predictable word.
inline double verify_marginal(const PlreModel& model, std::size_t k) {
  MarginalProblem p = marginal_problem(model, k);
  std::vector<NgramKey> contexts;
  for (const auto& entry : p.base->context_sums()) contexts.push_back(entry.first);
  std::sort(contexts.begin(), contexts.end());
  double worst = 0.0;
  std::vector<double> terms(contexts.size());
  for (WordId w = 0; w < model.vocab().size(); ++w) {
    if (!is_predictable(model.vocab(), w)) continue;
    for (std::size_t i = 0; i < contexts.size(); ++i)
      terms[i] = model.prob_at(k, w, contexts[i].view()) *
                 static_cast<double>(p.base->context_sum(contexts[i])) / p.total;
    worst = std::max(worst, std::abs(p.target[w] - pairwise_sum(terms)));
  }
  return worst;
}

namespace detail {

/// sum_h weight(h) P_k(w | h) for every w at once, following the level
/// structure: sparse entries, one pass per low-rank slice, then the lower
/// order with the accumulated hand-off weights.
inline void accumulate_marginal(const PlreModel& model, std::size_t k,
                                const ValueMap& weights, std::vector<double>& out) {
  if (k <= 1) {
    double mass = 0.0;
    for (const auto& entry : weights) mass += entry.second;
    const auto& uni = model.unigram().probs();
    for (WordId w = 0; w < out.size(); ++w) out[w] += mass * uni[w];
    return;
  }
  const PlreOrder& lv = model.level(k);
  ValueMap lower;
  ValueMap handoff;  // context -> weight * product of leftovers
  for (const auto& [h, weight] : weights) {
    if (lv.base.context_sum(h) == 0) {
      lower[h.drop_oldest()] += weight;
      continue;
    }
    double g = weight * lv.gamma(0, h);
    handoff[h] = g;
  }
  for (const auto& [key, c] : lv.base.entries()) {
    auto it = weights.find(key.context());
    if (it == weights.end()) continue;
    double s0 = static_cast<double>(lv.base.context_sum(key.context()));
    out[key.front()] +=
        it->second * (static_cast<double>(c) - lv.dstar * powered(c, lv.powers[1])) / s0;
  }
  for (std::size_t j = 0; j < lv.eta(); ++j) {
    const LowRankCPT& z = lv.lowrank[j];
    // per slice: L * (sum_cols R(:, col) * w(col) / S(h))
    std::map<std::size_t, std::vector<double>> mixed;
    for (const auto& [h, g] : handoff) {
      const LowRankSlice* s = z.slice_for(h);
      double denom = z.denominator(h);
      if (!s || denom <= 0.0) continue;
      auto col = LowRankSlice::find(s->col_words, h.back());
      if (!col) continue;
      auto& acc = mixed[static_cast<std::size_t>(s - z.slices().data())];
      acc.resize(s->factors.rank(), 0.0);
      const double* r = s->factors.right_col(*col);
      for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += r[q] * g / denom;
    }
    for (const auto& [index, acc] : mixed) {
      const LowRankSlice& s = z.slices()[index];
      for (std::size_t i = 0; i < s.row_words.size(); ++i) {
        const double* l = s.factors.left_row(i);
        double v = 0.0;
        for (std::size_t q = 0; q < acc.size(); ++q) v += l[q] * acc[q];
        out[s.row_words[i]] += v;
      }
    }
    for (auto& [h, g] : handoff) g *= lv.gamma(j + 1, h);
  }
  for (const auto& [h, g] : handoff) lower[h.drop_oldest()] += g;
  accumulate_marginal(model, k - 1, lower, out);
}

}  // namespace detail

/// Same quantity as verify_marginal, computed in time linear in the model
/// size instead of V times the number of contexts.
inline double verify_marginal_fast(const PlreModel& model, std::size_t k) {
  MarginalProblem p = marginal_problem(model, k);
  ValueMap weights;
  for (const auto& [h, c] : p.base->context_sums())
    weights.emplace(h, static_cast<double>(c) / p.total);
  std::vector<double> got(model.vocab().size(), 0.0);
  detail::accumulate_marginal(model, k, weights, got);
  double worst = 0.0;
  for (WordId w = 0; w < got.size(); ++w)
    if (is_predictable(model.vocab(), w)) worst = std::max(worst, std::abs(p.target[w] - got[w]));
  return worst;
}

/// Upper bound on the order-k marginal violation implied by the reported
/// row-sum residuals of every low-rank table at orders <= k. An active unk
/// floor in the unigram base moves at most floor_weight of mass away from
/// the continuation unigram, which is added on top.
inline double marginal_bound(const PlreModel& model, std::size_t k) {
  double residual = 0.0;
  for (std::size_t o = 2; o <= k; ++o)
    for (const auto& z : model.level(o).lowrank) residual += z.summary().row_residual_sum;
  return 1e-9 + residual / static_cast<double>(model.level(k).base.total()) +
         model.unigram().floor_weight();
}

struct LevelCheck {
  double max_local_violation = 0.0;  ///< powered = discounted + g_j * next
  std::size_t bound_violations = 0;  ///< entries with D_j outside [0, c^rho_j]
  std::size_t checked = 0;
};

/// Recomputes every level's powered conditionals from the base counts and
/// checks them against the stored leftover weights.
inline LevelCheck verify_local_constraints(const PlreModel& model, double tol = 1e-12) {
  LevelCheck out;
  for (const PlreOrder& lv : model.levels()) {
    const std::size_t levels = lv.eta() + 1;
    std::vector<ValueMap> sums(levels + 1);
    for (const auto& [key, c] : lv.base.entries())
      for (std::size_t j = 0; j <= levels; ++j) sums[j][key.context()] += powered(c, lv.powers[j]);
    for (const auto& [key, c] : lv.base.entries()) {
      NgramKey h = key.context();
      for (std::size_t j = 0; j < levels; ++j) {
        double pj = powered(c, lv.powers[j]);
        double d = lv.dstar * powered(c, lv.powers[j + 1]);
        if (d < 0.0 || d > pj * (1.0 + tol)) ++out.bound_violations;
        double sj = sums[j].at(h), sn = sums[j + 1].at(h);
        double lhs = pj / sj;
        double rhs = (pj - d) / sj + lv.gamma(j, h) * powered(c, lv.powers[j + 1]) / sn;
        out.max_local_violation = std::max(out.max_local_violation, std::abs(lhs - rhs));
        ++out.checked;
      }
    }
    // leftovers must be stored for exactly the observed contexts, each in [0, 1]
    for (std::size_t j = 0; j < levels; ++j)
      for (const auto& [h, g] : lv.gammas[j])
        if (!(g >= 0.0 && g <= 1.0 + tol) || lv.base.context_sum(h) == 0) ++out.bound_violations;
  }
  return out;
}

/// max over observed contexts of |prod_j g_j(h) - d*^(eta+1) N_+(h) / c~(h)|.
inline double verify_gamma_closed_form(const PlreModel& model) {
  double worst = 0.0;
  for (const PlreOrder& lv : model.levels()) {
    CountTable::Map n_plus;
    for (const auto& entry : lv.base.entries()) ++n_plus[entry.first.context()];
    double scale = std::pow(lv.dstar, static_cast<double>(lv.eta() + 1));
    for (const auto& [h, np] : n_plus) {
      double expect = scale * static_cast<double>(np) / static_cast<double>(lv.base.context_sum(h));
      worst = std::max(worst, std::abs(model.gamma_product(lv.order, h) - expect));
    }
  }
  return worst;
}

inline bool is_kn_equivalent(const PlreModel& model) {
  return std::all_of(model.levels().begin(), model.levels().end(),
                     [](const PlreOrder& lv) { return lv.eta() == 0; });
}

/// Interpolated KN over the same counts with D = d* per order.
inline NgramLM kn_counterpart(const PlreModel& model) {
  NgramOptions options;
  options.smoother = Smoother::kKn;
  for (const PlreOrder& lv : model.levels()) options.discounts.push_back(DiscountParams::single(lv.dstar));
  return NgramLM(model.vocab(), model.top_table(), options);
}

/// max |P_plre - P_kn| over `queries` random (word, context) pairs drawn
/// half from observed contexts and half uniformly over the vocabulary.
inline double verify_kn_reduction(const PlreModel& model, std::size_t queries,
                                  std::uint64_t seed) {
  if (!is_kn_equivalent(model))
    fail(ErrorCode::kInvalidArgument, "KN reduction applies only to eta = 0 models");
  NgramLM kn = kn_counterpart(model);
  std::vector<NgramKey> observed = observed_contexts(model.top_table());
  std::mt19937_64 rng(seed);
  const std::size_t v = model.vocab().size();
  std::uniform_int_distribution<WordId> word(0, static_cast<WordId>(v - 1));
  std::uniform_int_distribution<std::size_t> pick(0, observed.size() - 1);
  double worst = 0.0;
  for (std::size_t q = 0; q < queries; ++q) {
    NgramKey h;
    if (q % 2 == 0 && !observed.empty()) {
      h = observed[pick(rng)];
    } else {
      for (std::size_t i = 0; i + 1 < model.order(); ++i) h.push_back(word(rng));
    }
    WordId w = word(rng);
    if (!is_predictable(model.vocab(), w)) w = model.vocab().eos_id();
    worst = std::max(worst, std::abs(model.prob(w, h.view()) - kn.prob(w, h.view())));
  }
  return worst;
}

}  // namespace plre
