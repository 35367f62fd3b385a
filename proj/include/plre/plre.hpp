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

// Power low rank ensembles.
//
// At every order k >= 2 the model chains a sparse discounted term with
// eta low-rank terms built from element-wise powered counts, then hands the
// remaining mass to order k-1:
//
//   P_k(w | h) = (c(w,h) - D_0(w,h)) / S_0(h)
//              + g_0(h) [ Z_1(w | h) + g_1(h) [ ... + g_eta(h) P_{k-1}(w | h') ] ]
//
// with powers 1 = rho_0 > rho_1 > ... > rho_eta > rho_{eta+1} = 0,
// S_j(h) = sum_w c(w,h)^rho_j, discounts D_j = d* c^rho_{j+1} and leftover
// weights g_j(h) = d* S_{j+1}(h) / S_j(h). Z_j is the gKL low-rank
// approximation of the discounted powered counts c^rho_j - D_j, one matrix
// per interior context (rows: predicted word, columns: oldest history word),
// normalized by S_j(h).
//
// The base counts c are raw at the top order and continuation counts N_- at
// lower orders; with that choice the chained leftover collapses to
// d*^(eta+1) N_+(h) / c(h) and eta = 0 is exactly interpolated Kneser-Ney.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "plre/baselines.hpp"
#include "plre/factorization.hpp"
#include "plre/model.hpp"
#include "plre/parallel.hpp"

namespace plre {

using ValueMap = std::unordered_map<NgramKey, double, NgramKeyHash>;

/// c^rho with 0^rho := 0 (including rho = 0).
inline double powered(Count c, double rho) {
  if (c <= 0) return 0.0;
  if (rho == 1.0) return static_cast<double>(c);
  if (rho == 0.0) return 1.0;
  return std::pow(static_cast<double>(c), rho);
}

/// Element-wise powered view of a count table. Keeps a pointer to the source
/// table, which must outlive it.
struct PoweredCounts {
  const CountTable* source = nullptr;
  double power = 1.0;
  ValueMap entries;
  ValueMap context_sums;

  std::size_t order() const { return source->order(); }
  double value(const NgramKey& key) const {
    auto it = entries.find(key);
    return it == entries.end() ? 0.0 : it->second;
  }
  double context_sum(const NgramKey& context) const {
    auto it = context_sums.find(context);
    return it == context_sums.end() ? 0.0 : it->second;
  }
};

inline PoweredCounts power_counts(const CountTable& table, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    fail(ErrorCode::kInvalidArgument, "power must lie in [0, 1]");
  PoweredCounts out;
  out.source = &table;
  out.power = rho;
  out.entries.reserve(table.size());
  for (const auto& [key, c] : table.sorted_entries()) {
    double v = powered(c, rho);
    out.entries.emplace(key, v);
    out.context_sums[key.context()] += v;
  }
  return out;
}

/// Discounts and leftover weights for one level of a power chain.
struct DiscountSpec {
  std::size_t level = 0;
  double power = 1.0;       ///< rho_j
  double next_power = 0.0;  ///< rho_{j+1}
  double dstar = 0.0;
  ValueMap gammas;          ///< context -> g_j
  ValueMap denominators;    ///< context -> S_j

  /// D_j for an entry with base count c.
  double discount(Count c) const { return c > 0 ? dstar * powered(c, next_power) : 0.0; }
  double gamma(const NgramKey& context) const {
    auto it = gammas.find(context);
    return it == gammas.end() ? 0.0 : it->second;
  }
  /// (c^rho_j - D_j) / S_j(h); zero for unseen contexts.
  double discounted_conditional(Count c, const NgramKey& context) const {
    auto it = denominators.find(context);
    if (it == denominators.end() || c <= 0) return 0.0;
    return (powered(c, power) - discount(c)) / it->second;
  }
};

inline DiscountSpec compute_discounts(const PoweredCounts& base, double next_power,
                                      double dstar, std::size_t level = 0) {
  if (next_power > base.power)
    fail(ErrorCode::kInvalidArgument,
         "discount chain requires non-increasing powers");
  if (!(next_power >= 0.0))
    fail(ErrorCode::kInvalidArgument, "power must lie in [0, 1]");
  if (!(dstar >= 0.0 && dstar <= 1.0))
    fail(ErrorCode::kInvalidArgument, "d* must lie in [0, 1]");
  DiscountSpec spec;
  spec.level = level;
  spec.power = base.power;
  spec.next_power = next_power;
  spec.dstar = dstar;
  ValueMap next_sums;
  for (const auto& [key, c] : base.source->sorted_entries())
    next_sums[key.context()] += powered(c, next_power);
  for (const auto& [context, sum] : base.context_sums) {
    spec.denominators.emplace(context, sum);
    spec.gammas.emplace(context, dstar * next_sums.at(context) / sum);
  }
  return spec;
}

/// d* = D^(1/(eta+1)): chaining eta+1 levels reproduces the single discount D.
inline double derive_dstar(double discount, std::size_t eta) {
  if (!(discount > 0.0 && discount < 1.0))
    fail(ErrorCode::kInvalidArgument, "discount must lie in (0, 1)");
  if (eta == 0) return discount;
  return std::pow(discount, 1.0 / static_cast<double>(eta + 1));
}

/// Per-thread instrumentation of query cost.
struct QueryCounters {
  std::uint64_t multiply_adds = 0;   ///< inner-product terms in low-rank lookups
  std::uint64_t lowrank_lookups = 0;
  std::uint64_t sparse_lookups = 0;  ///< hash lookups of sparse n-gram entries
};

inline QueryCounters& query_counters() {
  thread_local QueryCounters counters;
  return counters;
}

/// One compacted slice of a low-rank table: the discounted powered counts of
/// a fixed interior context, rows indexed by predicted word and columns by
/// the oldest history word.
struct LowRankSlice {
  NgramKey interior;
  std::vector<WordId> row_words;  ///< sorted
  std::vector<WordId> col_words;  ///< sorted
  FactorPair factors;
  ConvergenceReport report;

  static std::optional<std::size_t> find(const std::vector<WordId>& words, WordId w) {
    auto it = std::lower_bound(words.begin(), words.end(), w);
    if (it == words.end() || *it != w) return std::nullopt;
    return static_cast<std::size_t>(it - words.begin());
  }
};

struct LowRankSummary {
  std::size_t slices = 0;
  std::size_t iterative_slices = 0;
  std::size_t unconverged_slices = 0;
  std::size_t clamped_slices = 0;
  std::size_t nnz = 0;
  std::size_t iterations = 0;
  double gkl = 0.0;
  double max_col_residual = 0.0;
  double max_row_residual = 0.0;
  /// Sum over slices of the max row residual: bounds the marginal violation
  /// this table can introduce (times 1/N).
  double row_residual_sum = 0.0;
};

/// Discounted low-rank conditional probability table Z(w | h) of one level.
class LowRankCPT {
 public:
  LowRankCPT() = default;
  LowRankCPT(std::size_t order, double power, std::size_t rank)
      : order_(order), power_(power), rank_(rank) {}

  std::size_t order() const noexcept { return order_; }
  double power() const noexcept { return power_; }
  std::size_t rank() const noexcept { return rank_; }
  const std::vector<LowRankSlice>& slices() const noexcept { return slices_; }
  const ValueMap& denominators() const noexcept { return denominators_; }
  const LowRankSummary& summary() const noexcept { return summary_; }

  void add_slice(LowRankSlice slice) {
    index_.emplace(slice.interior, slices_.size());
    slices_.push_back(std::move(slice));
  }
  void set_denominators(ValueMap d) { denominators_ = std::move(d); }
  void set_summary(const LowRankSummary& s) { summary_ = s; }

  double denominator(const NgramKey& context) const {
    auto it = denominators_.find(context);
    return it == denominators_.end() ? 0.0 : it->second;
  }

  const LowRankSlice* slice_for(const NgramKey& context) const {
    auto it = index_.find(interior_of(context));
    return it == index_.end() ? nullptr : &slices_[it->second];
  }

  /// Unnormalized Z(w, h): one rank-length inner product.
  double joint(WordId w, const NgramKey& context) const {
    const LowRankSlice* s = slice_for(context);
    if (!s) return 0.0;
    auto row = LowRankSlice::find(s->row_words, w);
    auto col = LowRankSlice::find(s->col_words, context.back());
    if (!row || !col) return 0.0;
    auto& counters = query_counters();
    counters.multiply_adds += s->factors.rank();
    ++counters.lowrank_lookups;
    return s->factors.value(*row, *col);
  }

  /// Z(w | h) = Z(w, h) / S(h); zero when h is unseen at this level.
  double conditional(WordId w, const NgramKey& context) const {
    double denom = denominator(context);
    if (denom <= 0.0) return 0.0;
    return joint(w, context) / denom;
  }

  /// The interior context: every history word but the oldest.
  static NgramKey interior_of(const NgramKey& context) { return context.sub(0, context.size() - 1); }

 private:
  std::size_t order_ = 2;
  double power_ = 0.0;
  std::size_t rank_ = 1;
  std::vector<LowRankSlice> slices_;
  std::unordered_map<NgramKey, std::size_t, NgramKeyHash> index_;
  ValueMap denominators_;
  LowRankSummary summary_;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  SplitMix64 g{seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL)};
  g.next();
  return g.next();
}

}  // namespace detail

struct LowRankOptions {
  NmfOptions nmf;
  std::size_t threads = 1;
  std::uint64_t seed_salt = 0;  ///< distinguishes tables built from one seed
};

/// Builds Z from powered counts and the level's discounts: slices are
/// compacted to their observed rows and columns and factorized independently
/// (in parallel) at rank min(rank, rows, cols).
inline LowRankCPT compute_z(const PoweredCounts& base, const DiscountSpec& spec,
                            std::size_t rank, const LowRankOptions& options = {}) {
  if (rank < 1) fail(ErrorCode::kInvalidArgument, "rank must be >= 1");
  if (base.power != spec.power)
    fail(ErrorCode::kInvalidArgument, "discount spec does not match powered counts");
  const std::size_t order = base.order();
  if (order < 2) fail(ErrorCode::kInvalidArgument, "low-rank tables need order >= 2");

  // Group entries by interior context, in key order for determinism.
  struct Cell {
    WordId row, col;
    double value;
  };
  std::map<NgramKey, std::vector<Cell>> groups;
  for (const auto& [key, c] : base.source->sorted_entries()) {
    double v = powered(c, base.power) - spec.discount(c);
    if (v < 0.0) {
      if (v < -1e-12 * powered(c, base.power))
        fail(ErrorCode::kInvariant, "negative discounted count");
      v = 0.0;
    }
    if (v == 0.0) continue;
    NgramKey context = key.context();
    groups[LowRankCPT::interior_of(context)].push_back({key.front(), context.back(), v});
  }

  std::vector<LowRankSlice> slices(groups.size());
  std::vector<SparseMatrix> matrices(groups.size());
  {
    std::size_t s = 0;
    for (auto& [interior, cells] : groups) {
      LowRankSlice& slice = slices[s];
      slice.interior = interior;
      for (const Cell& cell : cells) {
        slice.row_words.push_back(cell.row);
        slice.col_words.push_back(cell.col);
      }
      for (auto* words : {&slice.row_words, &slice.col_words}) {
        std::sort(words->begin(), words->end());
        words->erase(std::unique(words->begin(), words->end()), words->end());
      }
      std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
      });
      SparseMatrix m(slice.row_words.size(), slice.col_words.size());
      for (const Cell& cell : cells)
        m.add(*LowRankSlice::find(slice.row_words, cell.row),
              *LowRankSlice::find(slice.col_words, cell.col), cell.value);
      matrices[s] = std::move(m);
      ++s;
    }
  }

  parallel_for(slices.size(), options.threads, [&](std::size_t s) {
    const SparseMatrix& m = matrices[s];
    std::size_t effective = std::min({rank, m.rows(), m.cols()});
    NmfOptions nmf = options.nmf;
    nmf.seed = detail::mix_seed(options.nmf.seed, options.seed_salt, s);
    NmfResult r = nmf_gkl(m, effective, nmf);
    r.report.requested_rank = rank;
    slices[s].factors = std::move(r.factors);
    slices[s].report = std::move(r.report);
  });

  LowRankCPT table(order, base.power, rank);
  LowRankSummary summary;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const ConvergenceReport& r = slices[s].report;
    ++summary.slices;
    summary.nnz += matrices[s].nnz();
    bool iterative = r.rank > 1 && r.rank < std::min(matrices[s].rows(), matrices[s].cols());
    summary.iterative_slices += iterative;
    summary.unconverged_slices += !r.converged;
    summary.clamped_slices += r.rank < rank;
    summary.iterations += r.iterations;
    summary.gkl += r.final_gkl;
    summary.max_col_residual = std::max(summary.max_col_residual, r.max_col_residual);
    summary.max_row_residual = std::max(summary.max_row_residual, r.max_row_residual);
    summary.row_residual_sum += r.max_row_residual;
    table.add_slice(std::move(slices[s]));
  }
  table.set_denominators(spec.denominators);
  table.set_summary(summary);
  return table;
}

/// d* selection for one order.
struct DstarMode {
  bool gt_root = true;
  double fixed = 0.0;  ///< used when !gt_root
};

struct PlreConfig {
  std::size_t order = 3;
  /// Intermediate powers rho_1 > ... > rho_eta (each in (0, 1)) per order;
  /// orders without an entry use default_powers().
  std::map<std::size_t, std::vector<double>> powers;
  /// Ranks per intermediate level per order. Values in (0, 1) are fractions
  /// of the vocabulary size; values >= 1 are absolute. A single value applies
  /// to every level of that order; orders without an entry use default_rank.
  std::map<std::size_t, std::vector<double>> ranks;
  double default_rank = 5e-3;
  DstarMode dstar;
  NmfOptions nmf;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  /// One intermediate level at 0.5 for bigrams and trigrams; none above.
  std::vector<double> default_powers(std::size_t k) const {
    return k <= 3 ? std::vector<double>{0.5} : std::vector<double>{};
  }
  std::vector<double> powers_for(std::size_t k) const {
    auto it = powers.find(k);
    return it == powers.end() ? default_powers(k) : it->second;
  }
};

/// Resolves a rank given absolutely or as a vocabulary fraction.
inline std::size_t resolve_rank(double rank, std::size_t vocab_size,
                                std::vector<std::string>* warnings = nullptr) {
  if (!(rank > 0.0)) fail(ErrorCode::kConfig, "ranks must be positive");
  std::size_t r = rank < 1.0
                      ? static_cast<std::size_t>(std::ceil(rank * static_cast<double>(vocab_size)))
                      : static_cast<std::size_t>(std::llround(rank));
  r = std::max<std::size_t>(r, 1);
  if (r > vocab_size) {
    if (warnings)
      warnings->push_back("rank " + std::to_string(r) + " clamped to vocabulary size " +
                          std::to_string(vocab_size));
    r = vocab_size;
  }
  return r;
}

/// The level stack of one order.
struct PlreOrder {
  std::size_t order = 2;
  std::vector<double> powers;  ///< 1, rho_1, ..., rho_eta, 0
  std::vector<std::size_t> ranks;  ///< kappa_1..kappa_eta
  double dstar = 0.0;
  double gt_discount = 0.0;  ///< the order's Good-Turing estimate
  CountTable base;           ///< c~: raw at the top order, N_- below
  std::vector<LowRankCPT> lowrank;  ///< Z_1..Z_eta
  std::vector<ValueMap> gammas;     ///< g_0..g_eta per context

  std::size_t eta() const noexcept { return lowrank.size(); }
  double gamma(std::size_t j, const NgramKey& context) const {
    auto it = gammas[j].find(context);
    return it == gammas[j].end() ? 0.0 : it->second;
  }
};

struct BuildTimings {
  double discounts_seconds = 0.0;
  double factorization_seconds = 0.0;
  double assembly_seconds = 0.0;
};

class PlreModel final : public LanguageModel {
 public:
  PlreModel() = default;
  /// orders[k-2] holds order k; unigram_base is c~ at order 1.
  PlreModel(Vocabulary vocab, CountTable top, std::vector<PlreOrder> orders,
            CountTable unigram_base)
      : vocab_(std::move(vocab)), top_(std::move(top)), orders_(std::move(orders)),
        unigram_base_(std::move(unigram_base)) {
    if (orders_.size() + 1 != top_.order())
      fail(ErrorCode::kInvalidArgument, "one level stack per order >= 2 required");
    unigram_ = UnigramBase(vocab_, unigram_base_);
  }

  std::size_t order() const override { return top_.order(); }
  const Vocabulary& vocab() const override { return vocab_; }
  std::string name() const override { return "plre"; }

  const CountTable& top_table() const noexcept { return top_; }
  const PlreOrder& level(std::size_t k) const { return orders_.at(k - 2); }
  /// Mutable access for tooling and fault-injection tests.
  PlreOrder& mutable_level(std::size_t k) { return orders_.at(k - 2); }
  const std::vector<PlreOrder>& levels() const noexcept { return orders_; }
  const CountTable& unigram_base() const noexcept { return unigram_base_; }
  const UnigramBase& unigram() const noexcept { return unigram_; }
  const BuildTimings& timings() const noexcept { return timings_; }
  void set_timings(const BuildTimings& t) { timings_ = t; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  double prob(WordId word, std::span<const WordId> context) const override {
    std::size_t k = std::min(order(), context.size() + 1);
    return prob_at(k, word, context);
  }

  /// P at order k (k <= order()); context must hold at least k-1 words.
  double prob_at(std::size_t k, WordId word, std::span<const WordId> context) const {
    if (k <= 1) return unigram_(word);
    const PlreOrder& lv = orders_[k - 2];
    NgramKey h(context.first(k - 1));
    Count context_count = lv.base.context_sum(h);
    if (context_count == 0) return prob_at(k - 1, word, context);

    NgramKey key{word};
    for (WordId id : h.view()) key.push_back(id);
    ++query_counters().sparse_lookups;
    Count c = lv.base.count(key);
    double p = 0.0;
    if (c > 0)
      p = (static_cast<double>(c) - lv.dstar * powered(c, lv.powers[1])) /
          static_cast<double>(context_count);
    double weight = lv.gamma(0, h);
    for (std::size_t j = 0; j < lv.eta(); ++j) {
      p += weight * lv.lowrank[j].conditional(word, h);
      weight *= lv.gamma(j + 1, h);
    }
    return p + weight * prob_at(k - 1, word, context);
  }

  /// Product of the leftover weights g_0..g_eta at order k.
  double gamma_product(std::size_t k, const NgramKey& context) const {
    const PlreOrder& lv = level(k);
    double g = 1.0;
    for (std::size_t j = 0; j <= lv.eta(); ++j) g *= lv.gamma(j, context);
    return g;
  }

 private:
  Vocabulary vocab_;
  CountTable top_;
  std::vector<PlreOrder> orders_;
  CountTable unigram_base_;
  UnigramBase unigram_;
  BuildTimings timings_;
  std::vector<std::string> warnings_;
};

/// Builds the ensemble for every order from the top-order count table.
inline PlreModel build_plre(const Vocabulary& vocab, const CountTable& top,
                            const PlreConfig& config) {
  using clock = std::chrono::steady_clock;
  const std::size_t n = top.order();
  if (n < 2) fail(ErrorCode::kConfig, "PLRE needs order >= 2");
  std::vector<CountTable> raw = raw_tables(top);
  std::vector<std::string> warnings;
  BuildTimings timings;

  std::vector<PlreOrder> orders(n - 1);
  for (std::size_t k = n; k >= 2; --k) {
    PlreOrder& lv = orders[k - 2];
    lv.order = k;
    lv.base = k == n ? raw[k - 1] : continuation_table(raw[k]);

    std::vector<double> inner = config.powers_for(k);
    lv.powers.push_back(1.0);
    for (double p : inner) {
      if (!(p > 0.0 && p < 1.0 && p < lv.powers.back()))
        fail(ErrorCode::kConfig, "powers must descend strictly from 1 to 0");
      lv.powers.push_back(p);
    }
    lv.powers.push_back(0.0);
    const std::size_t eta = inner.size();

    std::vector<double> rank_spec;
    if (auto it = config.ranks.find(k); it != config.ranks.end()) rank_spec = it->second;
    if (rank_spec.empty()) rank_spec = {config.default_rank};
    if (eta > 0 && rank_spec.size() != 1 && rank_spec.size() != eta)
      fail(ErrorCode::kConfig, "need one rank per intermediate level at order " +
                                   std::to_string(k));
    for (std::size_t j = 0; j < eta; ++j)
      lv.ranks.push_back(resolve_rank(rank_spec.size() == 1 ? rank_spec[0] : rank_spec[j],
                                      vocab.size(), &warnings));

    auto n_of = counts_of_counts(lv.base);
    lv.gt_discount = good_turing_discount(n_of[0], n_of[1]);
    lv.dstar = config.dstar.gt_root ? derive_dstar(lv.gt_discount, eta) : config.dstar.fixed;
    if (!(lv.dstar >= 0.0 && lv.dstar <= 1.0))
      fail(ErrorCode::kConfig, "d* must lie in [0, 1]");

    auto t0 = clock::now();
    std::vector<PoweredCounts> pw;
    for (std::size_t j = 0; j <= eta; ++j) pw.push_back(power_counts(lv.base, lv.powers[j]));
    std::vector<DiscountSpec> specs;
    for (std::size_t j = 0; j <= eta; ++j) {
      specs.push_back(compute_discounts(pw[j], lv.powers[j + 1], lv.dstar, j));
      lv.gammas.push_back(specs.back().gammas);
    }
    auto t1 = clock::now();
    for (std::size_t j = 1; j <= eta; ++j) {
      LowRankOptions lo;
      lo.nmf = config.nmf;
      lo.nmf.seed = config.seed;
      lo.threads = config.threads;
      lo.seed_salt = k * 1000 + j;
      lv.lowrank.push_back(compute_z(pw[j], specs[j], lv.ranks[j - 1], lo));
    }
    auto t2 = clock::now();
    timings.discounts_seconds += std::chrono::duration<double>(t1 - t0).count();
    timings.factorization_seconds += std::chrono::duration<double>(t2 - t1).count();
  }
  auto t3 = clock::now();
  CountTable unigram_base = continuation_table(raw[1]);
  PlreModel model(vocab, top, std::move(orders), std::move(unigram_base));
  timings.assembly_seconds = std::chrono::duration<double>(clock::now() - t3).count();
  model.set_timings(timings);
  for (auto& w : warnings) model.add_warning(std::move(w));
  return model;
}

/// Free-function form of a PLRE query.
inline double plre_prob(const PlreModel& model, WordId w, std::span<const WordId> context) {
  return model.prob(w, context);
}

}  // namespace plre
