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

// plre: train, evaluate, compare and verify n-gram language models.
//
//   plre train   --corpus train.txt [--config plre.cfg] --out model.bin
//   plre eval    --model model.bin --test test.txt [--json]
//   plre verify  --model model.bin [--json]
//   plre compare --corpus train.txt --test test.txt --config kn.cfg --config plre.cfg
//   plre vocab   --corpus train.txt [--unk-threshold 1] [--out vocab.tsv]

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "plre/cli.hpp"

namespace {

void add_model_flags(CLI::App* app, plre::cli::Overrides& o) {
  app->add_option("--order", o.order, "maximum n-gram order")->check(CLI::Range(1, 6));
  app->add_option("--smoother", o.smoother, "mle | abs | kn | mkn | plre")
      ->check(CLI::IsMember({"mle", "abs", "kn", "mkn", "plre"}));
  app->add_option("--power", o.power, "intermediate powers, comma separated (empty: none)");
  app->add_option("--rank", o.rank, "rank: absolute, or a fraction 0 < f < 1 of V");
  app->add_option("--dstar", o.dstar, "gt-root or a fixed value in [0, 1]");
  app->add_option("--seed", o.seed, "factorization seed");
  app->add_option("--threads", o.threads, "worker threads (0: all cores)");
  app->add_option("--unk-threshold", o.unk_threshold, "types with count <= t become <unk>");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power low rank ensemble and Kneser-Ney n-gram language models"};
  app.require_subcommand(1);

  plre::cli::TrainArgs train;
  auto* t = app.add_subcommand("train", "build a model and write a container");
  t->add_option("--corpus", train.corpus, "training text, one sentence per line")->required();
  t->add_option("--config", train.config, "key = value config file");
  t->add_option("--out", train.out, "output container")->required();
  t->add_flag("--verbose", train.verbose, "print timing and factorization summaries");
  t->add_flag("--json", train.json, "machine-readable summary");
  add_model_flags(t, train.overrides);

  plre::cli::EvalArgs eval;
  std::optional<plre::Count> eval_unk;
  auto* e = app.add_subcommand("eval", "perplexity of a model on held-out text");
  e->add_option("--model", eval.model)->required();
  e->add_option("--test", eval.test)->required();
  e->add_option("--unk-threshold", eval_unk, "must match the training threshold");
  e->add_option("--threads", eval.threads);
  e->add_flag("--json", eval.json, "JSON-lines output");

  plre::cli::VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "check model invariants");
  v->add_option("--model", verify.model)->required();
  v->add_option("--seed", verify.seed, "seed for sampled contexts and queries");
  v->add_option("--max-contexts", verify.max_contexts, "normalization sample size");
  v->add_flag("--json", verify.json, "JSON-lines output");

  plre::cli::CompareArgs compare;
  std::string sweep;
  auto* c = app.add_subcommand("compare", "train several configs on shared counts and evaluate");
  c->add_option("--corpus", compare.corpus)->required();
  c->add_option("--test", compare.test)->required();
  c->add_option("--config", compare.configs, "config file or inline key=value;... list")
      ->required();
  c->add_option("--sweep", sweep, "order range LO-HI: baseline vs candidate per order");
  c->add_option("--csv", compare.csv, "sweep CSV output path");
  c->add_flag("--json", compare.json, "JSON-lines output");
  add_model_flags(c, compare.overrides);

  plre::cli::VocabArgs vocab;
  auto* w = app.add_subcommand("vocab", "export the vocabulary as word<TAB>id<TAB>count");
  w->add_option("--corpus", vocab.corpus)->required();
  w->add_option("--unk-threshold", vocab.unk_threshold);
  w->add_option("--out", vocab.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int rc = app.exit(err);
    return rc == 0 ? 0 : static_cast<int>(plre::ErrorCode::kInvalidArgument);
  }

  return plre::cli::guarded(
      [&]() -> int {
        if (*t) return plre::cli::cmd_train(train, std::cout);
        if (*e) {
          eval.unk_threshold = eval_unk;
          return plre::cli::cmd_eval(eval, std::cout);
        }
        if (*v) return plre::cli::cmd_verify(verify, std::cout);
        if (*c) {
          if (!sweep.empty()) {
            auto dash = sweep.find('-');
            if (dash == std::string::npos)
              plre::fail(plre::ErrorCode::kInvalidArgument, "--sweep expects LO-HI");
            compare.sweep = std::make_pair(std::stoul(sweep.substr(0, dash)),
                                           std::stoul(sweep.substr(dash + 1)));
          }
          return plre::cli::cmd_compare(compare, std::cout);
        }
        return plre::cli::cmd_vocab(vocab, std::cout);
      },
      std::cerr);
}
