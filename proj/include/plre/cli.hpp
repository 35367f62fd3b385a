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

// Command implementations behind the `plre` tool. Each command writes its
// report to `out` and returns a process exit code:
//
//   0  success
//   1  unexpected internal error
//   2  invalid argument        3  bad configuration
//   4  I/O failure             5  empty input
//   6  vocabulary mismatch     7  corrupt container
//   8  numerical failure       9  invariant check failed

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "plre/baselines.hpp"
#include "plre/config.hpp"
#include "plre/container.hpp"
#include "plre/eval.hpp"
#include "plre/plre.hpp"
#include "plre/verify.hpp"

namespace plre::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;

inline int exit_code(ErrorCode c) { return static_cast<int>(c); }

/// Command-line overrides applied on top of a config file.
struct Overrides {
  std::optional<std::size_t> order;
  std::optional<std::string> smoother;
  std::optional<std::string> power;
  std::optional<std::string> rank;
  std::optional<std::string> dstar;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<Count> unk_threshold;
};

inline void apply(TrainConfig& c, const Overrides& o) {
  if (o.smoother) apply_setting(c, "smoother", *o.smoother);
  if (o.order) apply_setting(c, "order", std::to_string(*o.order));
  if (o.power) apply_setting(c, "power", *o.power);
  if (o.rank) apply_setting(c, "rank", *o.rank);
  if (o.dstar) apply_setting(c, "dstar", *o.dstar);
  if (o.seed) apply_setting(c, "seed", std::to_string(*o.seed));
  if (o.threads) apply_setting(c, "threads", std::to_string(*o.threads));
  if (o.unk_threshold) apply_setting(c, "unk_threshold", std::to_string(*o.unk_threshold));
}

/// A config argument is a file path, or an inline "key=value;key=value" list.
inline TrainConfig resolve_config(const std::string& spec) {
  if (std::filesystem::exists(spec)) return load_config(spec);
  if (spec.find('=') == std::string::npos)
    fail(ErrorCode::kConfig, "config not found: " + spec);
  std::string text = spec;
  for (char& ch : text)
    if (ch == ';') ch = '\n';
  std::istringstream in(text);
  return parse_config(in);
}

inline std::vector<Sentence> read_corpus(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kIo, "cannot read " + path);
  auto sentences = read_sentences(path);
  if (sentences.empty()) fail(ErrorCode::kEmptyInput, path + " contains no sentences");
  return sentences;
}

using Clock = std::chrono::steady_clock;
inline double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

/// Training data shared across the models of one run.
struct Prepared {
  Vocabulary vocab;
  std::vector<Sentence> sentences;
  std::map<std::size_t, CountTable> tables;  ///< by order
  double counting_seconds = 0.0;

  const CountTable& table(std::size_t order, std::size_t threads) {
    auto it = tables.find(order);
    if (it != tables.end()) return it->second;
    auto t0 = Clock::now();
    auto padded = prepare_sentences(vocab, sentences, order);
    auto& t = tables.emplace(order, count_ngrams(padded, order, threads)).first->second;
    counting_seconds += seconds_since(t0);
    return t;
  }
};

inline Prepared prepare(const std::string& corpus, Count unk_threshold) {
  Prepared p;
  auto t0 = Clock::now();
  p.sentences = read_corpus(corpus);
  p.vocab = build_vocabulary(p.sentences, unk_threshold);
  p.counting_seconds = seconds_since(t0);
  return p;
}

struct BuildResult {
  std::shared_ptr<LanguageModel> model;
  double counting_seconds = 0.0;
  double build_seconds = 0.0;
};

inline BuildResult build_model(Prepared& data, const TrainConfig& c) {
  BuildResult r;
  double before = data.counting_seconds;
  const CountTable& table = data.table(c.order, c.threads);
  r.counting_seconds = data.counting_seconds - before;
  auto t0 = Clock::now();
  if (c.is_plre()) {
    PlreConfig pc = c.plre;
    pc.order = c.order;
    pc.threads = c.threads;
    r.model = std::make_shared<PlreModel>(build_plre(data.vocab, table, pc));
  } else {
    NgramOptions options;
    options.smoother = parse_smoother(c.smoother);
    r.model = std::make_shared<NgramLM>(data.vocab, table, options);
  }
  r.build_seconds = seconds_since(t0);
  return r;
}

inline void print_level_summary(std::ostream& out, const PlreModel& m) {
  for (const PlreOrder& lv : m.levels()) {
    out << "order " << lv.order << ": d*=" << format_number(lv.dstar, 6)
        << " (gt " << format_number(lv.gt_discount, 6) << "), eta=" << lv.eta() << "\n";
    for (std::size_t j = 0; j < lv.eta(); ++j) {
      const LowRankSummary& s = lv.lowrank[j].summary();
      out << "  z" << j + 1 << ": power=" << lv.powers[j + 1] << " rank=" << lv.ranks[j]
          << " slices=" << s.slices << " iterative=" << s.iterative_slices
          << " unconverged=" << s.unconverged_slices << " clamped=" << s.clamped_slices
          << " iterations=" << s.iterations << " gkl=" << s.gkl
          << " max_row_residual=" << s.max_row_residual
          << " max_col_residual=" << s.max_col_residual << "\n";
    }
  }
}

struct TrainArgs {
  std::string corpus;
  std::string config;  ///< optional
  std::string out;
  Overrides overrides;
  bool verbose = false;
  bool json = false;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
  auto t_start = Clock::now();
  TrainConfig c = a.config.empty() ? TrainConfig{} : resolve_config(a.config);
  apply(c, a.overrides);
  Prepared data = prepare(a.corpus, c.unk_threshold);
  BuildResult built = build_model(data, c);
  auto t_save = Clock::now();
  ContainerInfo info;
  info.config = to_json(c);
  info.config["corpus_tokens"] = [&] {
    std::size_t n = 0;
    for (const auto& s : data.sentences) n += s.size();
    return n;
  }();
  save_model_file(a.out, *built.model, info);
  double save_seconds = seconds_since(t_save);

  const auto* pm = dynamic_cast<const PlreModel*>(built.model.get());
  if (a.json) {
    nlohmann::ordered_json j;
    j["model"] = built.model->name();
    j["order"] = built.model->order();
    j["vocab_size"] = data.vocab.size();
    j["out"] = a.out;
    nlohmann::ordered_json t;
    t["counting"] = data.counting_seconds;
    if (pm) {
      t["discounts"] = pm->timings().discounts_seconds;
      t["factorization"] = pm->timings().factorization_seconds;
      t["assembly"] = pm->timings().assembly_seconds;
    } else {
      t["assembly"] = built.build_seconds;
    }
    t["save"] = save_seconds;
    t["total"] = seconds_since(t_start);
    j["timing"] = t;
    if (pm) j["warnings"] = pm->warnings();
    out << j.dump() << "\n";
    return kExitOk;
  }
  out << "trained " << built.model->name() << " order " << built.model->order()
      << " (V=" << data.vocab.size() << ") -> " << a.out << "\n";
  if (a.verbose) {
    out << "timing: counting " << format_number(data.counting_seconds, 3) << "s";
    if (pm)
      out << ", discounts " << format_number(pm->timings().discounts_seconds, 3)
          << "s, factorization " << format_number(pm->timings().factorization_seconds, 3)
          << "s, assembly " << format_number(pm->timings().assembly_seconds, 3) << "s";
    else
      out << ", assembly " << format_number(built.build_seconds, 3) << "s";
    out << ", save " << format_number(save_seconds, 3) << "s, total "
        << format_number(seconds_since(t_start), 3) << "s\n";
    if (pm) print_level_summary(out, *pm);
  }
  if (pm)
    for (const auto& w : pm->warnings()) out << "warning: " << w << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string test;
  std::optional<Count> unk_threshold;
  std::size_t threads = 1;
  bool json = false;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  LoadedModel loaded = load_model_file(a.model);
  if (a.unk_threshold) {
    auto cfg = loaded.header.value("config", nlohmann::ordered_json::object());
    if (cfg.contains("unk_threshold") && cfg["unk_threshold"].get<Count>() != *a.unk_threshold)
      fail(ErrorCode::kVocabMismatch, "model was trained with unk threshold " +
                                          cfg["unk_threshold"].dump());
  }
  auto test = read_corpus(a.test);
  EvalReport r = perplexity(*loaded.model, test, a.threads);
  if (a.json)
    write_jsonl(out, {r});
  else
    write_table(out, {r});
  return kExitOk;
}

struct VerifyArgs {
  std::string model;
  std::uint64_t seed = 1;
  std::size_t max_contexts = 2000;
  std::size_t kn_queries = 10000;
  double normalization_tol = 1e-8;
  double local_tol = 1e-12;
  double gamma_tol = 1e-12;
  double kn_tol = 1e-10;
  bool json = false;
};

/// Runs every applicable invariant check on a loaded model.
inline std::vector<CheckResult> run_checks(const LanguageModel& model, const VerifyArgs& a) {
  std::vector<CheckResult> checks;
  auto add = [&](std::string name, double value, double tol, std::string detail = {}) {
    checks.push_back({std::move(name), value, tol, value <= tol, std::move(detail)});
  };
  const CountTable* top = nullptr;
  if (auto* p = dynamic_cast<const PlreModel*>(&model)) top = &p->top_table();
  if (auto* n = dynamic_cast<const NgramLM*>(&model)) top = &n->top_table();

  if (top && model.order() > 1) {
    std::vector<NgramKey> contexts = observed_contexts(*top);
    std::size_t observed = contexts.size();
    if (contexts.size() > a.max_contexts) {
      std::mt19937_64 rng(a.seed);
      std::shuffle(contexts.begin(), contexts.end(), rng);
      contexts.resize(a.max_contexts);
    }
    auto unseen = unseen_contexts(*top, model.order() - 1, 100, a.seed);
    contexts.insert(contexts.end(), unseen.begin(), unseen.end());
    add("normalization", max_normalization_error(model, contexts), a.normalization_tol,
        std::to_string(contexts.size() - unseen.size()) + " of " + std::to_string(observed) +
            " observed + " + std::to_string(unseen.size()) + " unseen contexts");
  } else {
    add("normalization", max_normalization_error(model, {NgramKey{}}), a.normalization_tol);
  }

  if (auto* p = dynamic_cast<const PlreModel*>(&model)) {
    for (std::size_t k = 2; k <= p->order(); ++k) {
      double bound = marginal_bound(*p, k);
      add("marginal.order" + std::to_string(k), verify_marginal_fast(*p, k), bound,
          "bound from reported row residuals");
    }
    LevelCheck lc = verify_local_constraints(*p, a.local_tol);
    add("local_constraint", lc.max_local_violation, a.local_tol,
        std::to_string(lc.checked) + " entries");
    add("discount_bounds", static_cast<double>(lc.bound_violations), 0.0, "violating entries");
    add("gamma_closed_form", verify_gamma_closed_form(*p), a.gamma_tol);
    if (is_kn_equivalent(*p))
      add("kn_reduction", verify_kn_reduction(*p, a.kn_queries, a.seed), a.kn_tol,
          std::to_string(a.kn_queries) + " queries");
  }
  return checks;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  LoadedModel loaded = load_model_file(a.model);
  auto checks = run_checks(*loaded.model, a);
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    if (a.json) {
      nlohmann::ordered_json j;
      j["check"] = c.name;
      j["value"] = c.value;
      j["tolerance"] = c.tolerance;
      j["passed"] = c.passed;
      if (!c.detail.empty()) j["detail"] = c.detail;
      out << j.dump() << "\n";
    } else {
      out << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(20) << c.name
          << " max=" << std::scientific << std::setprecision(3) << c.value
          << " tol=" << c.tolerance << std::defaultfloat;
      if (!c.detail.empty()) out << "  (" << c.detail << ")";
      out << "\n";
    }
  }
  return ok ? kExitOk : exit_code(ErrorCode::kInvariant);
}

struct CompareArgs {
  std::string corpus;
  std::string test;
  std::vector<std::string> configs;
  Overrides overrides;  ///< applied to every config
  std::optional<std::pair<std::size_t, std::size_t>> sweep;  ///< order range
  std::string csv;  ///< sweep CSV destination; empty writes to `out`
  bool json = false;
};

inline int cmd_compare(const CompareArgs& a, std::ostream& out) {
  if (a.configs.empty()) fail(ErrorCode::kInvalidArgument, "compare needs at least one config");
  std::vector<TrainConfig> configs;
  for (const auto& spec : a.configs) {
    TrainConfig c = resolve_config(spec);
    apply(c, a.overrides);
    configs.push_back(c);
  }
  for (const auto& c : configs)
    if (c.unk_threshold != configs.front().unk_threshold)
      fail(ErrorCode::kConfig, "compared configs must share unk_threshold");
  Prepared data = prepare(a.corpus, configs.front().unk_threshold);
  auto test = read_corpus(a.test);

  if (a.sweep) {
    if (configs.size() != 2)
      fail(ErrorCode::kInvalidArgument, "a sweep takes exactly two configs: baseline, candidate");
    auto [lo, hi] = *a.sweep;
    if (lo < 2 || hi < lo || hi > kMaxOrder) fail(ErrorCode::kInvalidArgument, "bad sweep range");
    std::vector<std::shared_ptr<LanguageModel>> keep;
    std::vector<std::pair<const LanguageModel*, const LanguageModel*>> pairs;
    for (std::size_t k = lo; k <= hi; ++k) {
      TrainConfig b = configs[0], c = configs[1];
      b.order = c.order = k;
      keep.push_back(build_model(data, b).model);
      keep.push_back(build_model(data, c).model);
      pairs.emplace_back(keep[keep.size() - 2].get(), keep.back().get());
    }
    auto rows = order_sweep(pairs, test, configs[1].threads);
    if (a.csv.empty()) {
      write_sweep_csv(out, rows, configs[0].smoother, configs[1].smoother);
    } else {
      std::ofstream f(a.csv);
      if (!f) fail(ErrorCode::kIo, "cannot write " + a.csv);
      write_sweep_csv(f, rows, configs[0].smoother, configs[1].smoother);
      out << "wrote " << a.csv << "\n";
    }
    return kExitOk;
  }

  std::vector<EvalReport> reports;
  for (const auto& c : configs) {
    auto model = build_model(data, c).model;
    reports.push_back(perplexity(*model, test, c.threads));
  }
  if (a.json)
    write_jsonl(out, reports);
  else
    write_table(out, reports);
  return kExitOk;
}

struct VocabArgs {
  std::string corpus;
  Count unk_threshold = 1;
  std::string out;  ///< empty writes to the stream
};

inline int cmd_vocab(const VocabArgs& a, std::ostream& out) {
  Vocabulary v = build_vocabulary(read_corpus(a.corpus), a.unk_threshold);
  if (a.out.empty()) {
    v.write_tsv(out);
  } else {
    std::ofstream f(a.out);
    if (!f) fail(ErrorCode::kIo, "cannot write " + a.out);
    v.write_tsv(f);
  }
  return kExitOk;
}

/// Runs a command, converting errors into exit codes and a message on `err`.
template <typename Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace plre::cli
