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

// Reference smoothers: maximum likelihood, interpolated absolute
// discounting, interpolated Kneser-Ney and interpolated modified Kneser-Ney,
// with Good-Turing discount estimation from counts-of-counts.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "plre/model.hpp"

namespace plre {

enum class Smoother { kMle, kAbs, kKn, kMkn };

inline std::string to_string(Smoother s) {
  switch (s) {
    case Smoother::kMle: return "mle";
    case Smoother::kAbs: return "abs";
    case Smoother::kKn: return "kn";
    case Smoother::kMkn: return "mkn";
  }
  return "?";
}

inline Smoother parse_smoother(const std::string& s) {
  if (s == "mle") return Smoother::kMle;
  if (s == "abs") return Smoother::kAbs;
  if (s == "kn") return Smoother::kKn;
  if (s == "mkn") return Smoother::kMkn;
  fail(ErrorCode::kConfig, "unknown smoother: " + s);
}

/// D = n1 / (n1 + 2 n2), 0.5 when undefined, clamped to [0.01, 0.99].
inline double good_turing_discount(Count n1, Count n2) {
  Count denom = n1 + 2 * n2;
  if (denom <= 0) return 0.5;
  double d = static_cast<double>(n1) / static_cast<double>(denom);
  return std::clamp(d, 0.01, 0.99);
}

/// Discount for counts 1, 2 and >= 3. A single discount D is {D, D, D}.
struct DiscountParams {
  std::array<double, 3> d{0.0, 0.0, 0.0};

  static DiscountParams single(double value) { return {{value, value, value}}; }
  double for_count(Count c) const {
    if (c <= 0) return 0.0;
    return d[static_cast<std::size_t>(std::min<Count>(c, 3) - 1)];
  }
  friend bool operator==(const DiscountParams&, const DiscountParams&) = default;
};

/// Chen-Goodman modified Kneser-Ney discounts:
///   Y = n1 / (n1 + 2 n2),  D_k = k - (k + 1) Y n_{k+1} / n_k.
/// Y is the (clamped) single Good-Turing discount, which is also the fallback
/// for any D_k whose n_k is zero. D_k is clamped to [0, k].
inline DiscountParams mkn_discounts(Count n1, Count n2, Count n3, Count n4) {
  double y = good_turing_discount(n1, n2);
  const std::array<Count, 4> n{n1, n2, n3, n4};
  DiscountParams out;
  for (std::size_t k = 1; k <= 3; ++k) {
    double dk = y;
    if (n[k - 1] > 0)
      dk = static_cast<double>(k) -
           static_cast<double>(k + 1) * y * static_cast<double>(n[k]) /
               static_cast<double>(n[k - 1]);
    out.d[k - 1] = std::clamp(dk, 0.0, static_cast<double>(k));
  }
  return out;
}

/// Counts-of-counts n_1..n_4 of a table (index 0 holds n_1).
inline std::array<Count, 4> counts_of_counts(const CountTable& table) {
  std::array<Count, 4> n{0, 0, 0, 0};
  for (const auto& entry : table.entries())
    if (entry.second >= 1 && entry.second <= 4) ++n[static_cast<std::size_t>(entry.second - 1)];
  return n;
}

/// Per-context totals over the base counts of one order.
struct ContextStats {
  Count sum = 0;
  std::array<Count, 3> continuations{0, 0, 0};  ///< entries with count 1, 2, >= 3
  Count n_plus() const { return continuations[0] + continuations[1] + continuations[2]; }
};

struct NgramOptions {
  Smoother smoother = Smoother::kKn;
  /// Optional per-order discount override; element k-2 is used at order k.
  /// A single-element vector applies to every order.
  std::vector<DiscountParams> discounts;
};

/// Interpolated n-gram model over count tables of orders 1..n.
///
/// Orders use raw counts (mle, abs, and the top order of kn/mkn) or
/// continuation counts N_-(w, h) (lower orders of kn/mkn). For a context with
/// zero base count the order contributes nothing and the full mass passes to
/// the next-lower order.
class NgramLM final : public LanguageModel {
 public:
  NgramLM(Vocabulary vocab, const CountTable& top, NgramOptions options = {})
      : vocab_(std::move(vocab)), top_(top), smoother_(options.smoother) {
    const std::size_t n = top.order();
    std::vector<CountTable> raw = raw_tables(top);
    base_.resize(n);
    for (std::size_t k = 1; k <= n; ++k) {
      bool continuation = (smoother_ == Smoother::kKn || smoother_ == Smoother::kMkn) && k < n;
      base_[k - 1] = continuation ? continuation_table(raw[k]) : raw[k - 1];
    }
    unigram_ = UnigramBase(vocab_, base_[0]);

    stats_.resize(n);
    discounts_.assign(n, DiscountParams{});
    for (std::size_t k = 2; k <= n; ++k) {
      auto& stats = stats_[k - 1];
      for (const auto& [key, c] : base_[k - 1].entries()) {
        ContextStats& s = stats[key.context()];
        s.sum += c;
        ++s.continuations[static_cast<std::size_t>(std::min<Count>(c, 3) - 1)];
      }
      discounts_[k - 1] = pick_discount(k, options.discounts);
    }
  }

  std::size_t order() const override { return top_.order(); }
  const Vocabulary& vocab() const override { return vocab_; }
  std::string name() const override { return to_string(smoother_); }
  Smoother smoother() const noexcept { return smoother_; }
  const CountTable& top_table() const noexcept { return top_; }
  /// Base counts (raw or continuation) at order k.
  const CountTable& base_table(std::size_t k) const { return base_.at(k - 1); }
  const DiscountParams& discount(std::size_t k) const { return discounts_.at(k - 1); }
  const UnigramBase& unigram() const noexcept { return unigram_; }

  double prob(WordId word, std::span<const WordId> context) const override {
    std::size_t k = std::min(order(), context.size() + 1);
    return prob_at(k, word, context);
  }

  /// The leftover weight gamma(h) at order k (1 for unseen contexts).
  double gamma(std::size_t k, const NgramKey& context) const {
    const ContextStats* s = find_stats(k, context);
    if (!s) return 1.0;
    return leftover(k, *s) / static_cast<double>(s->sum);
  }

 private:
  DiscountParams pick_discount(std::size_t k, const std::vector<DiscountParams>& given) const {
    if (smoother_ == Smoother::kMle) return DiscountParams::single(0.0);
    if (!given.empty()) {
      const DiscountParams& d = given.size() == 1 ? given.front() : given.at(k - 2);
      for (std::size_t i = 0; i < 3; ++i)
        if (d.d[i] < 0.0 || d.d[i] > static_cast<double>(i + 1))
          fail(ErrorCode::kInvalidArgument, "discount out of range");
      if (smoother_ != Smoother::kMkn && (d.d[0] != d.d[1] || d.d[1] != d.d[2]))
        fail(ErrorCode::kInvalidArgument, "single-discount smoother given a triple");
      if (smoother_ != Smoother::kMkn && d.d[0] > 1.0)
        fail(ErrorCode::kInvalidArgument, "discount must be <= 1");
      return d;
    }
    auto n = counts_of_counts(base_[k - 1]);
    if (smoother_ == Smoother::kMkn) return mkn_discounts(n[0], n[1], n[2], n[3]);
    return DiscountParams::single(good_turing_discount(n[0], n[1]));
  }

  const ContextStats* find_stats(std::size_t k, const NgramKey& context) const {
    const auto& stats = stats_[k - 1];
    auto it = stats.find(context);
    return it == stats.end() || it->second.sum == 0 ? nullptr : &it->second;
  }

  double leftover(std::size_t k, const ContextStats& s) const {
    const DiscountParams& d = discounts_[k - 1];
    if (smoother_ == Smoother::kMkn)
      return d.d[0] * static_cast<double>(s.continuations[0]) +
             d.d[1] * static_cast<double>(s.continuations[1]) +
             d.d[2] * static_cast<double>(s.continuations[2]);
    return d.d[0] * static_cast<double>(s.n_plus());
  }

  double prob_at(std::size_t k, WordId word, std::span<const WordId> context) const {
    if (k <= 1) return unigram_(word);
    NgramKey h(context.first(k - 1));
    const ContextStats* s = find_stats(k, h);
    if (!s) return prob_at(k - 1, word, context);
    NgramKey key{word};
    for (WordId id : h.view()) key.push_back(id);
    Count c = base_[k - 1].count(key);
    double denom = static_cast<double>(s->sum);
    double discounted = c > 0 ? std::max(static_cast<double>(c) - discounts_[k - 1].for_count(c), 0.0) : 0.0;
    double gamma = leftover(k, *s) / denom;
    return discounted / denom + gamma * prob_at(k - 1, word, context);
  }

  Vocabulary vocab_;
  CountTable top_;
  Smoother smoother_;
  std::vector<CountTable> base_;
  std::vector<std::unordered_map<NgramKey, ContextStats, NgramKeyHash>> stats_;
  std::vector<DiscountParams> discounts_;
  UnigramBase unigram_;
};

}  // namespace plre
