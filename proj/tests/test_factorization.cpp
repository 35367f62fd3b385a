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
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "plre/factorization.hpp"

#include "generators.hpp"

namespace plre {
namespace {

using testing::random_low_rank;
using testing::random_sparse;

DenseMatrix dense(const SparseMatrix& m) {
  DenseMatrix d(m.rows(), m.cols());
  for (const auto& e : m.entries()) d(e.row, e.col) += e.value;
  return d;
}

TEST(Gkl, IdenticalArgumentsGiveZero) {
  SparseMatrix a = random_sparse(1, 12, 9, 0.3);
  EXPECT_EQ(gkl(a, dense(a)), 0.0);
}

TEST(Gkl, ScalarExample) {
  auto a = SparseMatrix::from_dense({{1.0}});
  EXPECT_NEAR(gkl(a, DenseMatrix::from_rows({{2.0}})), std::log(0.5) + 1.0, 1e-15);
  EXPECT_NEAR(gkl(a, DenseMatrix::from_rows({{2.0}})), 0.30685, 1e-5);
}

TEST(Gkl, ZeroEntriesContributeApproximation) {
  auto a = SparseMatrix::from_dense({{0.0, 1.0}});
  EXPECT_DOUBLE_EQ(gkl(a, DenseMatrix::from_rows({{3.0, 1.0}})), 3.0);
}

TEST(Gkl, MissingSupportIsInfinite) {
  auto a = SparseMatrix::from_dense({{1.0, 1.0}});
  EXPECT_EQ(gkl(a, DenseMatrix::from_rows({{1.0, 0.0}})), std::numeric_limits<double>::infinity());
}

TEST(Gkl, NonnegativeOnRandomPairs) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SparseMatrix a = random_sparse(seed, 8, 7, 0.4);
    SparseMatrix b = random_sparse(seed + 100, 8, 7, 1.0);
    EXPECT_GE(gkl(a, dense(b)), 0.0);
  }
}

TEST(Gkl, FactoredFormMatchesDense) {
  SparseMatrix a = random_sparse(3, 10, 10, 0.3);
  NmfResult r = nmf_gkl(a, 3);
  EXPECT_NEAR(gkl(a, r.factors), gkl(a, r.factors.to_dense()), 1e-9 * a.total());
}

TEST(BestRank1, RankOneInputReproduced) {
  auto m = SparseMatrix::from_dense({{1, 1}, {1, 1}});
  DenseMatrix d = best_rank1(m).to_dense();
  for (double x : d.data) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(BestRank1, DiagonalSpreadsEvenly) {
  auto m = SparseMatrix::from_dense({{2, 0}, {0, 2}});
  DenseMatrix d = best_rank1(m).to_dense();
  for (double x : d.data) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(BestRank1, OuterProductOfMarginals) {
  // row sums [4, 5, 2], column sums [3, 7, 1], total 11
  auto m = SparseMatrix::from_dense({{1, 2, 1}, {0, 5, 0}, {2, 0, 0}});
  FactorPair f = best_rank1(m);
  std::vector<double> rows{4, 5, 2}, cols{3, 7, 1};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_NEAR(f.value(i, j), rows[i] * cols[j] / 11.0, 1e-14);
}

TEST(BestRank1, ResidualsVanish) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SparseMatrix m = random_sparse(seed, 15, 11, 0.2);
    auto [row, col] = sum_residual(m, best_rank1(m));
    EXPECT_LT(row, 1e-12 * m.total());
    EXPECT_EQ(col, 0.0);
  }
}

TEST(BestRank1, BeatsRandomCandidates) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SparseMatrix m = random_sparse(seed, 10, 10, 0.3);
    double best = gkl(m, best_rank1(m));
    for (int trial = 0; trial < 1000; ++trial) {
      FactorPair f(10, 10, 1);
      for (double& x : f.left_data()) x = u(rng) + 1e-3;
      for (double& x : f.right_t_data()) x = u(rng) + 1e-3;
      ASSERT_LE(best, gkl(m, f)) << "seed " << seed << " trial " << trial;
    }
  }
}

TEST(SumResidual, DoubledLeftFactor) {
  SparseMatrix m = random_sparse(9, 6, 6, 0.5);
  FactorPair f = best_rank1(m);
  for (double& x : f.left_data()) x *= 2.0;
  auto [row, col] = sum_residual(m, f);
  std::vector<double> rs = m.row_sums();
  double max_row = *std::max_element(rs.begin(), rs.end());
  EXPECT_NEAR(row, max_row, 1e-12 * m.total());
  EXPECT_GT(col, 0.0);
  // summed over rows the deviation is the whole mass
  double total_dev = 0.0;
  std::vector<double> fr = f.row_sums();
  for (std::size_t i = 0; i < rs.size(); ++i) total_dev += fr[i] - rs[i];
  EXPECT_NEAR(total_dev, m.total(), 1e-12 * m.total());
}

TEST(Nmf, RankOneMatchesClosedForm) {
  SparseMatrix m = random_sparse(4, 12, 9, 0.3);
  NmfResult r = nmf_gkl(m, 1);
  FactorPair b = best_rank1(m);
  std::vector<double> a = r.factors.row_sums(), e = b.row_sums();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], e[i], 1e-8);
  a = r.factors.col_sums();
  e = b.col_sums();
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], e[j], 1e-8);
}

TEST(Nmf, RecoversRankTwoValues) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SparseMatrix m = random_low_rank(seed, 12, 10, 2);
    NmfOptions o;
    o.max_iters = 20000;
    o.rel_tol = 1e-14;
    o.seed = seed;
    NmfResult r = nmf_gkl(m, 2, o);
    EXPECT_LT(r.report.final_gkl, 1e-6 * m.total()) << "seed " << seed;
  }
}

TEST(Nmf, FullRankReproducesInput) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SparseMatrix m = random_sparse(seed, 9, 14, 0.25);
    NmfResult r = nmf_gkl(m, 9);
    EXPECT_LT(r.report.final_gkl, 1e-8 * m.total());
    EXPECT_EQ(r.report.rank, 9u);
  }
}

TEST(Nmf, RankClampedWithWarning) {
  SparseMatrix m = random_sparse(2, 4, 6, 0.5);
  NmfResult r = nmf_gkl(m, 50);
  EXPECT_EQ(r.report.rank, 4u);
  EXPECT_EQ(r.report.requested_rank, 50u);
  ASSERT_EQ(r.report.warnings.size(), 1u);
  EXPECT_LT(r.report.final_gkl, 1e-8 * m.total());
}

TEST(Nmf, ObjectiveNeverIncreases) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SparseMatrix m = random_sparse(seed, 30, 30, 0.15);
    NmfOptions o;
    o.seed = seed;
    o.record_history = true;
    NmfResult r = nmf_gkl(m, 4, o);
    const auto& h = r.report.history;
    ASSERT_GE(h.size(), 2u);
    for (std::size_t i = 1; i < h.size(); ++i)
      EXPECT_LE(h[i], h[i - 1] * (1.0 + 1e-12)) << "seed " << seed << " step " << i;
  }
}

TEST(Nmf, ColumnSumsExactRowSumsWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SparseMatrix m = random_sparse(seed, 30, 30, 0.15);
    NmfOptions o;
    o.seed = seed;
    o.rel_tol = 1e-9;
    o.max_iters = 5000;
    NmfResult r = nmf_gkl(m, 4, o);
    std::vector<double> target = m.col_sums(), got = r.factors.col_sums();
    for (std::size_t j = 0; j < target.size(); ++j) EXPECT_EQ(got[j], target[j]) << "col " << j;
    EXPECT_EQ(r.report.max_col_residual, 0.0);
    EXPECT_LT(r.report.max_row_residual, 1e-5 * m.total()) << "seed " << seed;
  }
}

TEST(Nmf, DeterministicGivenSeed) {
  SparseMatrix m = random_sparse(5, 20, 20, 0.2);
  NmfOptions o;
  o.seed = 42;
  NmfResult a = nmf_gkl(m, 3, o), b = nmf_gkl(m, 3, o);
  EXPECT_EQ(a.factors.left_data(), b.factors.left_data());
  EXPECT_EQ(a.factors.right_t_data(), b.factors.right_t_data());
  o.seed = 43;
  NmfResult c = nmf_gkl(m, 3, o);
  EXPECT_NE(a.factors.left_data(), c.factors.left_data());
}

TEST(Nmf, RejectsBadInput) {
  EXPECT_THROW(nmf_gkl(random_sparse(1, 3, 3, 0.5), 0), Error);
  EXPECT_THROW(nmf_gkl(SparseMatrix(3, 3), 1), Error);
  SparseMatrix m(2, 2);
  EXPECT_THROW(m.add(0, 0, -1.0), Error);
  EXPECT_THROW(m.add(2, 0, 1.0), Error);
  EXPECT_THROW(SparseMatrix(0, 2), Error);
}

}  // namespace
}  // namespace plre
