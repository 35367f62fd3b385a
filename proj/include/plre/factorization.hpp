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

// Nonnegative low-rank approximation of sparse nonnegative matrices under
// generalized KL divergence:
//
//   gKL(A || B) = sum_ij A_ij log(A_ij / B_ij) - A_ij + B_ij,  0 log 0 := 0.
//
// Minimizers of gKL over rank-k nonnegative matrices preserve the row and
// column sums of A; the smoothing code relies on the column sums exactly and
// on the row sums up to the convergence tolerance.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "plre/types.hpp"

namespace plre {

/// Sparse nonnegative matrix in coordinate form. Only positive values are
/// stored.
class SparseMatrix {
 public:
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };

  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0)
      fail(ErrorCode::kInvalidArgument, "matrix dimensions must be >= 1");
  }

  /// Dense row-major input; zeros are dropped.
  static SparseMatrix from_dense(const std::vector<std::vector<double>>& rows) {
    SparseMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_)
        fail(ErrorCode::kInvalidArgument, "ragged dense matrix");
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        if (rows[i][j] != 0.0) m.add(i, j, rows[i][j]);
    }
    return m;
  }

  void add(std::size_t row, std::size_t col, double value) {
    if (row >= rows_ || col >= cols_)
      fail(ErrorCode::kInvalidArgument, "matrix index out of range");
    if (!(value >= 0.0) || !std::isfinite(value))
      fail(ErrorCode::kInvalidArgument, "matrix entries must be finite and >= 0");
    if (value == 0.0) return;
    entries_.push_back({static_cast<std::uint32_t>(row),
                        static_cast<std::uint32_t>(col), value});
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  double total() const {
    double t = 0.0;
    for (const auto& e : entries_) t += e.value;
    return t;
  }
  std::vector<double> row_sums() const {
    std::vector<double> s(rows_, 0.0);
    for (const auto& e : entries_) s[e.row] += e.value;
    return s;
  }
  std::vector<double> col_sums() const {
    std::vector<double> s(cols_, 0.0);
    for (const auto& e : entries_) s[e.col] += e.value;
    return s;
  }
  std::size_t nonzero_rows() const { return count_nonzero(row_sums()); }
  std::size_t nonzero_cols() const { return count_nonzero(col_sums()); }

 private:
  static std::size_t count_nonzero(const std::vector<double>& v) {
    std::size_t n = 0;
    for (double x : v) n += x > 0.0;
    return n;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Entry> entries_;
};

/// Dense row-major matrix; used for explicit approximations and in tests.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& in) {
    DenseMatrix m(in.size(), in.empty() ? 0 : in.front().size());
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = in[i].at(j);
    return m;
  }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Nonnegative factors with L * R approximating a rows x cols matrix.
/// L is rows x rank; R is rank x cols but stored transposed (cols x rank) so
/// that one entry of the product is a contiguous rank-length inner product.
class FactorPair {
 public:
  FactorPair() = default;
  FactorPair(std::size_t rows, std::size_t cols, std::size_t rank)
      : rows_(rows), cols_(cols), rank_(rank), left_(rows * rank, 0.0),
        right_t_(cols * rank, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t rank() const noexcept { return rank_; }

  double& left(std::size_t i, std::size_t k) { return left_[i * rank_ + k]; }
  double left(std::size_t i, std::size_t k) const { return left_[i * rank_ + k]; }
  /// R(k, j)
  double& right(std::size_t k, std::size_t j) { return right_t_[j * rank_ + k]; }
  double right(std::size_t k, std::size_t j) const { return right_t_[j * rank_ + k]; }

  const double* left_row(std::size_t i) const { return left_.data() + i * rank_; }
  const double* right_col(std::size_t j) const { return right_t_.data() + j * rank_; }
  double* left_row(std::size_t i) { return left_.data() + i * rank_; }
  double* right_col(std::size_t j) { return right_t_.data() + j * rank_; }

  const std::vector<double>& left_data() const noexcept { return left_; }
  const std::vector<double>& right_t_data() const noexcept { return right_t_; }
  std::vector<double>& left_data() noexcept { return left_; }
  std::vector<double>& right_t_data() noexcept { return right_t_; }

  /// (L R)(i, j): rank multiply-adds.
  double value(std::size_t i, std::size_t j) const {
    const double* l = left_row(i);
    const double* r = right_col(j);
    double s = 0.0;
    for (std::size_t k = 0; k < rank_; ++k) s += l[k] * r[k];
    return s;
  }

  /// sum_i L(i, k)
  std::vector<double> left_col_sums() const {
    std::vector<double> s(rank_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < rank_; ++k) s[k] += left(i, k);
    return s;
  }
  /// sum_j R(k, j)
  std::vector<double> right_row_sums() const {
    std::vector<double> s(rank_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t k = 0; k < rank_; ++k) s[k] += right(k, j);
    return s;
  }
  /// Row sums of L R, computed as L (R 1).
  std::vector<double> row_sums() const {
    std::vector<double> r = right_row_sums();
    std::vector<double> out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < rank_; ++k) out[i] += left(i, k) * r[k];
    return out;
  }
  /// Column sums of L R, computed as (1 L) R.
  std::vector<double> col_sums() const {
    std::vector<double> l = left_col_sums();
    std::vector<double> out(cols_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j) out[j] = column_sum(l, j);
    return out;
  }
  double column_sum(const std::vector<double>& left_sums, std::size_t j) const {
    const double* r = right_col(j);
    double s = 0.0;
    for (std::size_t k = 0; k < rank_; ++k) s += left_sums[k] * r[k];
    return s;
  }
  double total() const {
    std::vector<double> l = left_col_sums();
    std::vector<double> r = right_row_sums();
    double s = 0.0;
    for (std::size_t k = 0; k < rank_; ++k) s += l[k] * r[k];
    return s;
  }

  DenseMatrix to_dense() const {
    DenseMatrix out(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(i, j) = value(i, j);
    return out;
  }

  friend bool operator==(const FactorPair&, const FactorPair&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t rank_ = 0;
  std::vector<double> left_;
  std::vector<double> right_t_;
};

struct NmfOptions {
  std::size_t max_iters = 200;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  double epsilon = 1e-12;  ///< division guard
  bool record_history = false;
};

struct ConvergenceReport {
  std::size_t requested_rank = 0;
  std::size_t rank = 0;
  std::size_t iterations = 0;
  double final_gkl = 0.0;
  double max_row_residual = 0.0;
  double max_col_residual = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;
  /// Objective before the first update and after every iteration, when
  /// NmfOptions::record_history is set.
  std::vector<double> history;
};

struct NmfResult {
  FactorPair factors;
  ConvergenceReport report;
};

namespace detail {

inline double gkl_term(double a, double b) {
  if (a == 0.0) return b;
  if (b <= 0.0) return std::numeric_limits<double>::infinity();
  return a * std::log(a / b) - a + b;
}

struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform on (0, 1].
  double unit() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }
};

/// Moves ulp-sized steps on `x` until `sum()` equals `target`, starting
/// with a Newton step. Returns whether the target was hit.
template <typename Sum>
inline bool walk_to(double& x, double target, double slope, Sum sum) {
  for (int step = 0; step < 64; ++step) {
    double s = sum();
    if (s == target) return true;
    double adjusted = x + (target - s) / slope;
    if (adjusted == x || step >= 4)
      adjusted = std::nextafter(x, s < target ? HUGE_VAL : 0.0);
    x = std::max(adjusted, 0.0);
  }
  return sum() == target;
}

/// Rescales each column of L to sum to exactly 1, moving the scale into
/// the matching row of R.
inline void normalize_left(FactorPair& f) {
  std::vector<double> lsum = f.left_col_sums();
  for (std::size_t k = 0; k < f.rank(); ++k) {
    if (!(lsum[k] > 0.0)) continue;
    std::size_t top = 0;
    for (std::size_t i = 0; i < f.rows(); ++i) {
      f.left(i, k) /= lsum[k];
      if (f.left(i, k) > f.left(top, k)) top = i;
    }
    for (std::size_t j = 0; j < f.cols(); ++j) f.right(k, j) *= lsum[k];
    walk_to(f.left(top, k), 1.0, 1.0, [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < f.rows(); ++i) s += f.left(i, k);
      return s;
    });
  }
}

/// Scales column j of R so that the column sum of L R equals target[j]
/// bit-for-bit. L columns are first normalized to unit sum, so the column
/// sum is the plain sum of R(:, j). Its terms are then walked onto the
/// target, largest first; a smaller term has a finer ulp and gets past
/// round-half-even ties that a larger one cannot.
inline void enforce_column_sums(FactorPair& f, const std::vector<double>& target) {
  normalize_left(f);
  const std::vector<double> lsum = f.left_col_sums();
  std::vector<std::size_t> order(f.rank());
  for (std::size_t j = 0; j < f.cols(); ++j) {
    double s = f.column_sum(lsum, j);
    if (s <= 0.0 || target[j] <= 0.0) continue;
    double scale = target[j] / s;
    double* r = f.right_col(j);
    for (std::size_t k = 0; k < f.rank(); ++k) r[k] *= scale;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return lsum[a] * r[a] > lsum[b] * r[b];
    });
    for (std::size_t k : order) {
      if (lsum[k] <= 0.0 || r[k] <= 0.0) continue;
      if (walk_to(r[k], target[j], lsum[k], [&] { return f.column_sum(lsum, j); })) break;
    }
  }
}

}  // namespace detail

/// gKL(A || B) for an explicit approximation B. Returns +infinity when B has
/// a zero where A is positive.
inline double gkl(const SparseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows || a.cols() != b.cols)
    fail(ErrorCode::kInvalidArgument, "gkl: shape mismatch");
  double s = 0.0;
  for (double x : b.data) s += x;
  for (const auto& e : a.entries()) {
    double bij = b(e.row, e.col);
    if (bij <= 0.0) return std::numeric_limits<double>::infinity();
    s += e.value * std::log(e.value / bij) - e.value;
  }
  return std::max(s, 0.0);
}

/// gKL(A || L R) evaluated in O(nnz * rank) without densifying.
inline double gkl(const SparseMatrix& a, const FactorPair& f) {
  if (a.rows() != f.rows() || a.cols() != f.cols())
    fail(ErrorCode::kInvalidArgument, "gkl: shape mismatch");
  double s = f.total();
  for (const auto& e : a.entries()) {
    double bij = f.value(e.row, e.col);
    if (bij <= 0.0) return std::numeric_limits<double>::infinity();
    s += e.value * std::log(e.value / bij) - e.value;
  }
  return std::max(s, 0.0);
}

/// Closed-form gKL-optimal rank-1 approximation: the outer product of the
/// row and column marginals divided by the total.
inline FactorPair best_rank1(const SparseMatrix& m) {
  double total = m.total();
  if (!(total > 0.0))
    fail(ErrorCode::kInvalidArgument, "best_rank1: matrix has no positive entry");
  FactorPair f(m.rows(), m.cols(), 1);
  std::vector<double> rows = m.row_sums();
  std::vector<double> cols = m.col_sums();
  for (std::size_t i = 0; i < m.rows(); ++i) f.left(i, 0) = rows[i] / total;
  for (std::size_t j = 0; j < m.cols(); ++j) f.right(0, j) = cols[j];
  detail::enforce_column_sums(f, cols);
  return f;
}

/// Largest absolute deviation between the row (column) sums of M and L R.
inline std::pair<double, double> sum_residual(const SparseMatrix& m, const FactorPair& f) {
  if (m.rows() != f.rows() || m.cols() != f.cols())
    fail(ErrorCode::kInvalidArgument, "sum_residual: shape mismatch");
  std::vector<double> mr = m.row_sums(), mc = m.col_sums();
  std::vector<double> fr = f.row_sums(), fc = f.col_sums();
  double row = 0.0, col = 0.0;
  for (std::size_t i = 0; i < mr.size(); ++i) row = std::max(row, std::abs(mr[i] - fr[i]));
  for (std::size_t j = 0; j < mc.size(); ++j) col = std::max(col, std::abs(mc[j] - fc[j]));
  return {row, col};
}

namespace detail {

/// Exact factorization at rank min(rows, cols): one factor is a selection
/// matrix over the nonzero rows (or columns), the other holds M itself.
inline FactorPair exact_factors(const SparseMatrix& m) {
  std::vector<double> rs = m.row_sums(), cs = m.col_sums();
  std::vector<std::size_t> rpos(m.rows(), SIZE_MAX), cpos(m.cols(), SIZE_MAX);
  std::size_t nr = 0, nc = 0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (rs[i] > 0.0) rpos[i] = nr++;
  for (std::size_t j = 0; j < m.cols(); ++j)
    if (cs[j] > 0.0) cpos[j] = nc++;
  if (nr <= nc) {
    FactorPair f(m.rows(), m.cols(), nr);
    for (std::size_t i = 0; i < m.rows(); ++i)
      if (rpos[i] != SIZE_MAX) f.left(i, rpos[i]) = 1.0;
    for (const auto& e : m.entries()) f.right(rpos[e.row], e.col) += e.value;
    return f;
  }
  FactorPair f(m.rows(), m.cols(), nc);
  for (std::size_t j = 0; j < m.cols(); ++j)
    if (cpos[j] != SIZE_MAX) f.right(cpos[j], j) = 1.0;
  for (const auto& e : m.entries()) f.left(e.row, cpos[e.col]) += e.value;
  return f;
}

inline void fill_report_residuals(const SparseMatrix& m, const FactorPair& f,
                                  ConvergenceReport& report) {
  auto [row, col] = sum_residual(m, f);
  report.max_row_residual = row;
  report.max_col_residual = col;
}

}  // namespace detail

/// Rank-k nonnegative factorization minimizing gKL with Lee-Seung
/// multiplicative updates. Each iteration updates R, then L; the objective is
/// non-increasing. Iteration stops after max_iters or once the relative
/// improvement drops below rel_tol. Column sums of the result are then
/// rescaled to match M exactly; the row-sum deviation is reported.
///
/// Rank 1 uses the closed form. A rank equal to the number of nonzero rows
/// or columns reproduces M exactly. Larger ranks are clamped (with a warning
/// in the report).
inline NmfResult nmf_gkl(const SparseMatrix& m, std::size_t rank,
                         const NmfOptions& options = {}) {
  if (rank < 1) fail(ErrorCode::kInvalidArgument, "nmf_gkl: rank must be >= 1");
  const double total = m.total();
  if (!(total > 0.0))
    fail(ErrorCode::kInvalidArgument, "nmf_gkl: matrix has no positive entry");

  NmfResult result;
  ConvergenceReport& report = result.report;
  report.requested_rank = rank;
  const std::size_t max_rank = std::min(m.nonzero_rows(), m.nonzero_cols());
  if (rank > max_rank) {
    report.warnings.push_back("rank " + std::to_string(rank) + " clamped to " +
                              std::to_string(max_rank));
    rank = max_rank;
  }
  report.rank = rank;

  if (rank == 1 || rank == max_rank) {
    result.factors = rank == 1 && max_rank > 1 ? best_rank1(m) : detail::exact_factors(m);
    report.rank = result.factors.rank();
    report.final_gkl = gkl(m, result.factors);
    report.converged = true;
    if (options.record_history) report.history.push_back(report.final_gkl);
    detail::fill_report_residuals(m, result.factors, report);
    return result;
  }

  const std::size_t rows = m.rows(), cols = m.cols(), k = rank;
  FactorPair f(rows, cols, k);
  detail::SplitMix64 rng{options.seed ^ 0x5bd1e9955bd1e995ULL};
  for (double& x : f.left_data()) x = rng.unit();
  for (double& x : f.right_t_data()) x = rng.unit();
  {
    double scale = std::sqrt(total / f.total());
    for (double& x : f.left_data()) x *= scale;
    for (double& x : f.right_t_data()) x *= scale;
  }

  const auto& entries = m.entries();
  const double eps = options.epsilon;
  std::vector<double> approx(entries.size());
  std::vector<double> numer;
  double data_term = 0.0;  // sum a log a - a, constant
  for (const auto& e : entries) data_term += e.value * std::log(e.value) - e.value;

  auto refresh_approx = [&] {
    for (std::size_t e = 0; e < entries.size(); ++e)
      approx[e] = f.value(entries[e].row, entries[e].col);
  };
  auto objective = [&] {
    double s = data_term + f.total();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (approx[e] <= 0.0) return std::numeric_limits<double>::infinity();
      s -= entries[e].value * std::log(approx[e]);
    }
    if (!std::isfinite(s))
      fail(ErrorCode::kNumerical, "nmf_gkl: non-finite objective (check epsilon)");
    return std::max(s, 0.0);
  };

  refresh_approx();
  double current = objective();
  if (options.record_history) report.history.push_back(current);

  std::size_t it = 0;
  for (; it < options.max_iters; ++it) {
    // R(k, j) *= sum_i L(i, k) M_ij / (LR)_ij / sum_i L(i, k)
    {
      std::vector<double> lsum = f.left_col_sums();
      numer.assign(cols * k, 0.0);
      for (std::size_t e = 0; e < entries.size(); ++e) {
        double q = entries[e].value / std::max(approx[e], eps);
        const double* l = f.left_row(entries[e].row);
        double* out = numer.data() + entries[e].col * k;
        for (std::size_t r = 0; r < k; ++r) out[r] += l[r] * q;
      }
      for (std::size_t j = 0; j < cols; ++j) {
        double* rc = f.right_col(j);
        for (std::size_t r = 0; r < k; ++r)
          rc[r] *= numer[j * k + r] / std::max(lsum[r], eps);
      }
    }
    refresh_approx();
    // L(i, k) *= sum_j R(k, j) M_ij / (LR)_ij / sum_j R(k, j)
    {
      std::vector<double> rsum = f.right_row_sums();
      numer.assign(rows * k, 0.0);
      for (std::size_t e = 0; e < entries.size(); ++e) {
        double q = entries[e].value / std::max(approx[e], eps);
        const double* rc = f.right_col(entries[e].col);
        double* out = numer.data() + entries[e].row * k;
        for (std::size_t r = 0; r < k; ++r) out[r] += rc[r] * q;
      }
      for (std::size_t i = 0; i < rows; ++i) {
        double* l = f.left_row(i);
        for (std::size_t r = 0; r < k; ++r)
          l[r] *= numer[i * k + r] / std::max(rsum[r], eps);
      }
    }
    for (double x : f.left_data())
      if (std::isnan(x)) fail(ErrorCode::kNumerical, "nmf_gkl: NaN in update");
    refresh_approx();
    double next = objective();
    if (options.record_history) report.history.push_back(next);
#ifndef NDEBUG
    assert(next <= current * (1.0 + 1e-9) + 1e-12 * total);
#endif
    double improvement = current - next;
    current = next;
    if (improvement <= options.rel_tol * std::max(current, 1e-300)) {
      report.converged = true;
      ++it;
      break;
    }
  }
  report.iterations = it;

  detail::enforce_column_sums(f, m.col_sums());
  result.factors = std::move(f);
  report.final_gkl = gkl(m, result.factors);
  detail::fill_report_residuals(m, result.factors, report);
  return result;
}

}  // namespace plre
