#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "darol/matrix.hpp"

namespace darol::numerics {

// Two sigma_min conventions coexist in this code base and they are not
// interchangeable: the row-Gram value is sqrt(lambda_min(M M^T)) and the
// column-Gram value is sqrt(lambda_min(M^T M)). A wide full-row-rank matrix
// has a positive row-Gram value and a zero column-Gram value.
struct SvdResult {
  std::vector<double> singular_values;  // nonincreasing, min(rows, cols) many
  double sigma_min_rowgram = 0.0;
  double sigma_min_colgram = 0.0;
  double cond_rowgram = std::numeric_limits<double>::infinity();
};

struct SvdFactorization {
  Matrix u;                // rows x k
  std::vector<double> s;   // k = min(rows, cols), nonincreasing
  Matrix v;                // cols x k;  m = u * diag(s) * v^T
};

namespace detail {

constexpr double kJacobiTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

// One-sided Jacobi (Hestenes) on a matrix with cols <= rows: rotates column
// pairs until all are mutually orthogonal to relative mass kJacobiTol.
// Returns B = U*diag(s) in place and accumulates V.
inline void one_sided_jacobi(Matrix& b, Matrix& v) {
  const std::size_t n = b.cols;
  v = identity(n);
  for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < b.rows; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          alpha += bp * bp;
          beta += bq * bq;
          gamma += bp * bq;
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        const double rel = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, rel);
        if (rel <= kJacobiTol) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < b.rows; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          b(i, p) = c * bp - s * bq;
          b(i, q) = s * bp + c * bq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (off <= kJacobiTol) return;
  }
  // Re-measure so the diagnostic carries the final residual.
  double off = 0.0;
  for (std::size_t p = 0; p + 1 < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      double alpha = 0.0, beta = 0.0, gamma = 0.0;
      for (std::size_t i = 0; i < b.rows; ++i) {
        alpha += b(i, p) * b(i, p);
        beta += b(i, q) * b(i, q);
        gamma += b(i, p) * b(i, q);
      }
      if (alpha > 0.0 && beta > 0.0)
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
    }
  }
  throw NumericalError("svd: one-sided Jacobi did not converge, off-diagonal mass " +
                       format_double(off));
}

}  // namespace detail

inline SvdFactorization svd_factor(const Matrix& m) {
  if (m.empty()) throw std::invalid_argument("svd: empty matrix");
  if (!all_finite(m)) throw std::invalid_argument("svd: non-finite entries");

  const bool flipped = m.cols > m.rows;  // factor the transpose, swap back
  Matrix b = flipped ? transpose(m) : m;
  Matrix v;
  detail::one_sided_jacobi(b, v);

  const std::size_t k = b.cols;
  std::vector<double> s(k);
  Matrix u(b.rows, k);
  for (std::size_t j = 0; j < k; ++j) {
    double nrm = 0.0;
    for (std::size_t i = 0; i < b.rows; ++i) nrm += b(i, j) * b(i, j);
    s[j] = std::sqrt(nrm);
    if (s[j] > 0.0) {
      for (std::size_t i = 0; i < b.rows; ++i) u(i, j) = b(i, j) / s[j];
    }
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return s[a] > s[c]; });

  SvdFactorization f;
  f.s.resize(k);
  f.u = Matrix(b.rows, k);
  f.v = Matrix(v.rows, k);
  for (std::size_t j = 0; j < k; ++j) {
    f.s[j] = s[order[j]];
    for (std::size_t i = 0; i < b.rows; ++i) f.u(i, j) = u(i, order[j]);
    for (std::size_t i = 0; i < v.rows; ++i) f.v(i, j) = v(i, order[j]);
  }
  if (flipped) std::swap(f.u, f.v);
  return f;
}

inline SvdResult svd(const Matrix& m) {
  const SvdFactorization f = svd_factor(m);
  SvdResult r;
  r.singular_values = f.s;
  const double smallest = f.s.back();
  // Eigenvalues of M M^T are the squared singular values padded with zeros
  // when rows > cols; symmetrically for M^T M.
  r.sigma_min_rowgram = (m.rows <= m.cols) ? smallest : 0.0;
  r.sigma_min_colgram = (m.cols <= m.rows) ? smallest : 0.0;
  r.cond_rowgram = (r.sigma_min_rowgram > 0.0)
                       ? f.s.front() / r.sigma_min_rowgram
                       : std::numeric_limits<double>::infinity();
  return r;
}

// Verdicts for the singular-value chains of a column split X = [A B].
// sigma_min is read in the row-Gram sense throughout, which is the reading
// under which the min chain and the upper cond inequality are theorems
// (lambda_min(AA^T + BB^T) >= lambda_min(AA^T) + lambda_min(BB^T)). The
// literal two-sided chain and the lower cond inequality are recorded as
// observations only; the column-Gram reading admits counterexamples, e.g.
// X = I_2 split into two unit columns.
struct SubmatrixReport {
  bool sigma_max_holds = false;
  bool sigma_min_holds = false;
  bool cond_holds = false;
  bool cond_vacuous = false;  // a block has infinite row-Gram cond

  double sigma_max_slack_lower = 0.0;  // smax(X)^2 - smax(A)^2
  double sigma_max_slack_upper = 0.0;  // smax(A)^2 + smax(B)^2 - smax(X)^2
  double sigma_min_slack = 0.0;        // smin(X)^2 - smin(A)^2 - smin(B)^2
  double cond_slack = 0.0;             // cond(A) + cond(B) - cond(X)

  // Observations, not asserted anywhere.
  bool literal_min_chain_rowgram = false;  // smin(A)^2 >= smin(X)^2 >= sum
  bool literal_min_chain_colgram = false;  // same under the column-Gram reading
  bool cond_lower_holds = false;           // cond(A) <= cond(X)

  double smax_x = 0.0, smax_a = 0.0, smax_b = 0.0;
  double smin_rg_x = 0.0, smin_rg_a = 0.0, smin_rg_b = 0.0;
};

inline SubmatrixReport submatrix_singular_report(
    const Matrix& x, const std::vector<std::size_t>& left_cols) {
  if (left_cols.empty())
    throw std::invalid_argument("submatrix report: left_cols empty");
  std::vector<bool> in_left(x.cols, false);
  for (std::size_t j : left_cols) {
    if (j >= x.cols)
      throw std::invalid_argument("submatrix report: column index out of range");
    in_left[j] = true;
  }
  std::vector<std::size_t> left, right;
  for (std::size_t j = 0; j < x.cols; ++j)
    (in_left[j] ? left : right).push_back(j);
  if (right.empty())
    throw std::invalid_argument("submatrix report: left_cols must be a proper subset");

  const SvdResult sx = svd(x);
  const SvdResult sa = svd(select_columns(x, left));
  const SvdResult sb = svd(select_columns(x, right));

  SubmatrixReport rep;
  rep.smax_x = sx.singular_values.front();
  rep.smax_a = sa.singular_values.front();
  rep.smax_b = sb.singular_values.front();
  rep.smin_rg_x = sx.sigma_min_rowgram;
  rep.smin_rg_a = sa.sigma_min_rowgram;
  rep.smin_rg_b = sb.sigma_min_rowgram;

  const double sq = [](double v) { return v * v; }(rep.smax_x);
  const double tol = 1e-9 * std::max(1.0, sq);

  rep.sigma_max_slack_lower = sq - rep.smax_a * rep.smax_a;
  rep.sigma_max_slack_upper =
      rep.smax_a * rep.smax_a + rep.smax_b * rep.smax_b - sq;
  rep.sigma_max_holds = rep.sigma_max_slack_lower >= -tol &&
                        rep.sigma_max_slack_upper >= -tol;

  rep.sigma_min_slack = rep.smin_rg_x * rep.smin_rg_x -
                        rep.smin_rg_a * rep.smin_rg_a -
                        rep.smin_rg_b * rep.smin_rg_b;
  rep.sigma_min_holds = rep.sigma_min_slack >= -tol;

  const double cond_x = sx.cond_rowgram;
  const double cond_a = sa.cond_rowgram;
  const double cond_b = sb.cond_rowgram;
  rep.cond_vacuous = std::isinf(cond_a) || std::isinf(cond_b);
  if (rep.cond_vacuous) {
    rep.cond_slack = std::numeric_limits<double>::infinity();
    rep.cond_holds = true;
  } else {
    rep.cond_slack = cond_a + cond_b - cond_x;
    rep.cond_holds = rep.cond_slack >= -1e-9 * std::max(1.0, cond_x);
  }
  rep.cond_lower_holds = std::isinf(cond_a) ? std::isinf(cond_x)
                                            : cond_a <= cond_x * (1.0 + 1e-12);

  rep.literal_min_chain_rowgram =
      rep.smin_rg_a * rep.smin_rg_a >= rep.smin_rg_x * rep.smin_rg_x - tol &&
      rep.sigma_min_holds;
  const double cg_x = sx.sigma_min_colgram, cg_a = sa.sigma_min_colgram,
               cg_b = sb.sigma_min_colgram;
  rep.literal_min_chain_colgram =
      cg_a * cg_a >= cg_x * cg_x - tol &&
      cg_x * cg_x >= cg_a * cg_a + cg_b * cg_b - tol;
  return rep;
}

}  // namespace darol::numerics
