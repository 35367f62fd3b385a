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

// Held-out evaluation: sentence log-probabilities, perplexity and
// order-sweep comparisons.

#pragma once

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "plre/model.hpp"
#include "plre/parallel.hpp"

namespace plre {

struct EvalReport {
  std::string model;
  std::size_t order = 0;
  std::size_t sentences = 0;
  std::size_t tokens = 0;  ///< predicted tokens: words plus eos
  std::size_t oov = 0;
  double logprob = 0.0;  ///< natural log
  double perplexity = 0.0;

  double oov_rate() const { return tokens ? static_cast<double>(oov) / static_cast<double>(tokens) : 0.0; }
};

/// Natural-log probability of a padded sentence. Every non-bos position is
/// predicted from up to order-1 preceding ids. *predicted receives the
/// number of scored positions.
inline double log_prob_sentence(const LanguageModel& model, const IdSentence& padded,
                                std::size_t* predicted = nullptr) {
  const std::size_t history = model.order() - 1;
  const WordId bos = model.vocab().bos_id();
  std::vector<double> logs;
  logs.reserve(padded.size());
  std::vector<WordId> context;
  for (std::size_t i = 0; i < padded.size(); ++i) {
    if (padded[i] == bos) continue;
    context.clear();
    for (std::size_t j = i; j > 0 && context.size() < history; --j) context.push_back(padded[j - 1]);
    double p = model.prob(padded[i], context);
    if (!(p > 0.0) || !std::isfinite(p))
      fail(ErrorCode::kNumerical, model.name() + " assigned probability " + std::to_string(p) +
                                      " to word id " + std::to_string(padded[i]));
    logs.push_back(std::log(p));
  }
  if (predicted) *predicted = logs.size();
  return pairwise_sum(logs);
}

/// Perplexity over pre-mapped padded sentences.
inline EvalReport perplexity(const LanguageModel& model, const std::vector<IdSentence>& padded,
                             std::size_t oov = 0, std::size_t threads = 1) {
  if (padded.empty()) fail(ErrorCode::kEmptyInput, "empty test set");
  std::vector<double> logs(padded.size());
  std::vector<std::size_t> counts(padded.size());
  parallel_for(padded.size(), threads, [&](std::size_t s) {
    logs[s] = log_prob_sentence(model, padded[s], &counts[s]);
  });
  EvalReport r;
  r.model = model.name();
  r.order = model.order();
  r.sentences = padded.size();
  for (std::size_t c : counts) r.tokens += c;
  r.oov = oov;
  r.logprob = pairwise_sum(logs);
  r.perplexity = std::exp(-r.logprob / static_cast<double>(r.tokens));
  return r;
}

/// Perplexity over tokenized sentences; OOV tokens map to unk and are counted.
inline EvalReport perplexity(const LanguageModel& model, const std::vector<Sentence>& test,
                             std::size_t threads = 1) {
  std::size_t oov = 0;
  auto padded = prepare_sentences(model.vocab(), test, model.order(), &oov);
  return perplexity(model, padded, oov, threads);
}

/// (baseline - candidate) / baseline * 100.
inline double relative_improvement(double baseline, double candidate) {
  return (baseline - candidate) / baseline * 100.0;
}

struct SweepRow {
  std::size_t order = 0;
  double baseline = 0.0;
  double candidate = 0.0;
  double improvement = 0.0;  ///< percent
};

/// Pairs baseline and candidate models by order and evaluates both on the
/// same test sentences.
inline std::vector<SweepRow> order_sweep(
    const std::vector<std::pair<const LanguageModel*, const LanguageModel*>>& pairs,
    const std::vector<Sentence>& test, std::size_t threads = 1) {
  std::vector<SweepRow> rows;
  for (const auto& [baseline, candidate] : pairs) {
    if (baseline->vocab().hash() != candidate->vocab().hash())
      fail(ErrorCode::kVocabMismatch, "sweep models were trained on different vocabularies");
    if (baseline->order() != candidate->order())
      fail(ErrorCode::kInvalidArgument, "sweep pairs must share an order");
    SweepRow row;
    row.order = baseline->order();
    row.baseline = perplexity(*baseline, test, threads).perplexity;
    row.candidate = perplexity(*candidate, test, threads).perplexity;
    row.improvement = relative_improvement(row.baseline, row.candidate);
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_number(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                            const std::string& baseline, const std::string& candidate) {
  out << "order," << baseline << "_ppl," << candidate << "_ppl,improvement_pct\n";
  for (const auto& r : rows)
    out << r.order << ',' << format_number(r.baseline, 4) << ',' << format_number(r.candidate, 4)
        << ',' << format_number(r.improvement, 4) << '\n';
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["order"] = r.order;
  j["sentences"] = r.sentences;
  j["tokens"] = r.tokens;
  j["oov"] = r.oov;
  j["oov_rate"] = r.oov_rate();
  j["logprob"] = r.logprob;
  j["perplexity"] = r.perplexity;
  return j;
}

/// One JSON object per line.
inline void write_jsonl(std::ostream& out, const std::vector<EvalReport>& reports) {
  for (const auto& r : reports) out << to_json(r).dump() << '\n';
}

/// Fixed-width table; `best` marks the row with the lowest perplexity.
inline void write_table(std::ostream& out, const std::vector<EvalReport>& reports) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (reports[i].perplexity < reports[best].perplexity) best = i;
  out << std::left << std::setw(12) << "model" << std::right << std::setw(6) << "order"
      << std::setw(10) << "tokens" << std::setw(8) << "oov" << std::setw(16) << "logprob"
      << std::setw(14) << "perplexity" << "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << std::left << std::setw(12) << r.model << std::right << std::setw(6) << r.order
        << std::setw(10) << r.tokens << std::setw(8) << r.oov << std::setw(16)
        << format_number(r.logprob, 4) << std::setw(14) << format_number(r.perplexity, 4)
        << (reports.size() > 1 && i == best ? "  best" : "") << "\n";
  }
}

}  // namespace plre
