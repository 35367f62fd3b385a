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

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "plre/eval.hpp"

#include "fixtures.hpp"
#include "generators.hpp"

namespace plre {
namespace {

using testing::make_ngram;
using testing::make_toy;
using testing::random_corpus;
using testing::Toy;

class UniformModel final : public LanguageModel {
 public:
  explicit UniformModel(Vocabulary v) : vocab_(std::move(v)) {}
  std::size_t order() const override { return 2; }
  const Vocabulary& vocab() const override { return vocab_; }
  std::string name() const override { return "uniform"; }
  double prob(WordId w, std::span<const WordId>) const override {
    return is_predictable(vocab_, w) ? 1.0 / double(vocab_.size() - 1) : 0.0;
  }

 private:
  Vocabulary vocab_;
};

class LeakyModel final : public LanguageModel {
 public:
  explicit LeakyModel(Vocabulary v) : vocab_(std::move(v)) {}
  std::size_t order() const override { return 2; }
  const Vocabulary& vocab() const override { return vocab_; }
  std::string name() const override { return "leaky"; }
  double prob(WordId w, std::span<const WordId>) const override {
    return w == vocab_.eos_id() ? 0.0 : 0.5;
  }

 private:
  Vocabulary vocab_;
};

std::vector<Sentence> parse(const std::string& text) {
  std::istringstream in(text);
  return read_sentences(in);
}

Vocabulary four_word_vocab() {
  // unk, </s>, a, b are predictable
  return build_vocabulary(parse("a a b b"), 1);
}

TEST(LogProb, UniformSingleToken) {
  UniformModel m(four_word_vocab());
  IdSentence s = pad_sentence(map_sentence(m.vocab(), {"a"}), 2);
  std::size_t n = 0;
  EXPECT_DOUBLE_EQ(log_prob_sentence(m, s, &n), 2.0 * std::log(0.25));
  EXPECT_EQ(n, 2u);
}

TEST(Perplexity, UniformModelOfFourWords) {
  UniformModel m(four_word_vocab());
  EvalReport r = perplexity(m, parse("a b\nb a a\nzzz"));
  EXPECT_DOUBLE_EQ(r.perplexity, 4.0);
  EXPECT_EQ(r.tokens, 9u);
  EXPECT_EQ(r.oov, 1u);
  EXPECT_EQ(r.sentences, 3u);
  EXPECT_NEAR(r.oov_rate(), 1.0 / 9.0, 1e-15);
}

TEST(Perplexity, EmptyTestSetRejected) {
  UniformModel m(four_word_vocab());
  try {
    perplexity(m, std::vector<Sentence>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(Perplexity, ZeroProbabilityIsAnError) {
  LeakyModel m(four_word_vocab());
  try {
    perplexity(m, parse("a"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
  }
}

TEST(Perplexity, MemorizedSentenceApproachesOne) {
  auto train = parse("the cat sat on the");
  Toy t = make_toy(train, 6, 0);
  NgramLM mle = make_ngram(t, Smoother::kMle);
  EvalReport r = perplexity(mle, train);
  EXPECT_GE(r.perplexity, 1.0);
  EXPECT_LT(r.perplexity, 1.0 + 1e-12);
  NgramLM kn = make_ngram(t, Smoother::kKn);
  EXPECT_GT(perplexity(kn, train).perplexity, 1.0);
}

TEST(LogProb, AdditiveOverSentences) {
  Toy t = make_toy(testing::toy_train(), 3);
  NgramLM lm = make_ngram(t, Smoother::kKn);
  auto padded = prepare_sentences(t.vocab, testing::toy_test(), 3);
  double sum = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : padded) {
    std::size_t n = 0;
    sum += log_prob_sentence(lm, s, &n);
    tokens += n;
  }
  EvalReport r = perplexity(lm, padded);
  EXPECT_NEAR(r.logprob, sum, 1e-9 * std::abs(sum));
  EXPECT_EQ(r.tokens, tokens);
  EXPECT_NEAR(r.perplexity, std::exp(-r.logprob / double(r.tokens)), 1e-12);
}

TEST(LogProb, MatchesOracleKneserNey) {
  Toy t = make_toy(random_corpus(12, 40, 15, 1.1, 0.05), 2);
  NgramLM lm = make_ngram(t, Smoother::kKn);
  auto oracle = testing::oracle_lm(t.oracle(), testing::OracleLM::kKn);
  for (const auto& ids : t.ids) {
    IdSentence padded = pad_sentence(ids, 2);
    double expect = 0.0;
    for (std::size_t i = 1; i < padded.size(); ++i)
      expect += std::log(oracle.prob(int(padded[i]), {int(padded[i - 1])}));
    EXPECT_NEAR(log_prob_sentence(lm, padded), expect, 1e-12);
  }
}

TEST(Perplexity, InvariantUnderPermutation) {
  Toy t = make_toy(testing::toy_train(), 3);
  NgramLM lm = make_ngram(t, Smoother::kMkn);
  auto test = testing::toy_test();
  double base = perplexity(lm, test).perplexity;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(test.begin(), test.end(), rng);
    EXPECT_NEAR(perplexity(lm, test).perplexity, base, 1e-12 * base);
    EXPECT_NEAR(perplexity(lm, test, 4).perplexity, base, 1e-12 * base);
  }
}

TEST(Perplexity, UnionIsWeightedGeometricMean) {
  Toy t = make_toy(testing::toy_train(), 2);
  NgramLM lm = make_ngram(t, Smoother::kKn);
  const auto& test = testing::toy_test();
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t cut = 1 + rng() % (test.size() - 1);
    std::vector<Sentence> a(test.begin(), test.begin() + cut), b(test.begin() + cut, test.end());
    EvalReport ra = perplexity(lm, a), rb = perplexity(lm, b), all = perplexity(lm, test);
    double mean = std::exp((double(ra.tokens) * std::log(ra.perplexity) +
                            double(rb.tokens) * std::log(rb.perplexity)) /
                           double(ra.tokens + rb.tokens));
    EXPECT_NEAR(all.perplexity, mean, 1e-10 * mean);
    EXPECT_LE(all.perplexity, std::max(ra.perplexity, rb.perplexity) * (1 + 1e-12));
    EXPECT_GE(all.perplexity, std::min(ra.perplexity, rb.perplexity) * (1 - 1e-12));
  }
}

TEST(Sweep, IdenticalModelsGiveZeroImprovement) {
  std::vector<NgramLM> models;
  for (std::size_t order : {2u, 3u, 4u}) models.push_back(make_ngram(make_toy(testing::toy_train(), order), Smoother::kKn));
  std::vector<std::pair<const LanguageModel*, const LanguageModel*>> pairs;
  for (const auto& m : models) pairs.emplace_back(&m, &m);
  auto rows = order_sweep(pairs, testing::toy_test());
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_EQ(r.improvement, 0.0);
}

TEST(Sweep, MismatchedVocabulariesRejected) {
  NgramLM a = make_ngram(make_toy(testing::toy_train(), 2, 1), Smoother::kKn);
  NgramLM b = make_ngram(make_toy(testing::toy_train(), 2, 0), Smoother::kKn);
  try {
    order_sweep({{&a, &b}}, testing::toy_test());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVocabMismatch);
  }
}

TEST(Sweep, RelativeImprovement) {
  EXPECT_DOUBLE_EQ(relative_improvement(10.0, 8.0), 20.0);
  EXPECT_DOUBLE_EQ(relative_improvement(10.0, 12.0), -20.0);
}

std::string sweep_csv() {
  std::vector<NgramLM> baselines;
  std::vector<PlreModel> candidates;
  for (std::size_t order : {2u, 3u, 4u}) {
    Toy t = make_toy(testing::toy_train(), order);
    baselines.push_back(make_ngram(t, Smoother::kMkn));
    PlreConfig c;
    c.default_rank = 4;
    candidates.push_back(build_plre(t.vocab, t.top, c));
  }
  std::vector<std::pair<const LanguageModel*, const LanguageModel*>> pairs;
  for (std::size_t i = 0; i < 3; ++i) pairs.emplace_back(&baselines[i], &candidates[i]);
  std::ostringstream out;
  write_sweep_csv(out, order_sweep(pairs, testing::toy_test()), "mkn", "plre");
  return out.str();
}

TEST(Sweep, CsvMatchesGoldenFile) {
  std::ifstream in(testing::data_path("sweep_golden.csv"));
  ASSERT_TRUE(in) << "missing golden file";
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(sweep_csv(), golden.str());
}

TEST(Report, JsonFields) {
  UniformModel m(four_word_vocab());
  EvalReport r = perplexity(m, parse("a b"));
  auto j = to_json(r);
  for (const char* key : {"model", "order", "sentences", "tokens", "oov", "oov_rate", "logprob",
                          "perplexity"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["model"], "uniform");
  EXPECT_TRUE(j["perplexity"].is_number_float());
  EXPECT_TRUE(j["tokens"].is_number_unsigned());
  std::ostringstream out;
  write_jsonl(out, {r, r});
  std::istringstream lines(out.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(nlohmann::json::parse(line)["perplexity"], r.perplexity);
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Report, TableMarksBestRow) {
  EvalReport a, b;
  a.model = "kn";
  a.perplexity = 30;
  b.model = "plre";
  b.perplexity = 25;
  std::ostringstream out;
  write_table(out, {a, b});
  std::string text = out.str();
  EXPECT_NE(text.find("plre"), std::string::npos);
  EXPECT_EQ(text.find("best"), text.rfind("best"));
  EXPECT_GT(text.find("best"), text.find("plre"));
  std::ostringstream single;
  write_table(single, {a});
  EXPECT_EQ(single.str().find("best"), std::string::npos);
}

}  // namespace
}  // namespace plre
