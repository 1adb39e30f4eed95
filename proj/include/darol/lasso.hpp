#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "darol/matrix.hpp"
#include "darol/rng.hpp"
#include "darol/svd.hpp"

namespace darol::lasso {

using numerics::Matrix;

inline constexpr double kSupportTol = 1e-8;   // |x_i| above this is active
inline constexpr double kRankTol = 1e-10;     // full-column-rank threshold
inline constexpr double kDefaultTol = 1e-10;  // KKT residual stopping rule
inline constexpr std::size_t kDefaultMaxIter = 200000;

struct LassoProblem {
  Matrix a;
  Vec b;
  double lambda = 1.0;
};

struct LassoSolution {
  Vec x_hat;
  std::vector<std::size_t> support;  // {i : |x_i| > kSupportTol}
  Vec residual;                      // A x_hat - b
  double objective = 0.0;            // 0.5||Ax-b||^2 + lambda||x||_1
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

inline void validate(const LassoProblem& p) {
  if (p.a.empty()) throw std::invalid_argument("lasso: empty matrix");
  if (!numerics::all_finite(p.a) || !all_finite(p.b))
    throw std::invalid_argument("lasso: non-finite input");
  if (p.b.size() != p.a.rows)
    throw std::invalid_argument("lasso: b length != rows of A");
  if (!(p.lambda > 0.0)) throw std::invalid_argument("lasso: lambda must be > 0");
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Stationarity violation of x for the problem: active coordinates must have
// correlation A_i^T(b - Ax) equal to lambda*sign(x_i), inactive ones at most
// lambda in magnitude.
inline double kkt_residual(const LassoProblem& p, const Vec& x) {
  const Vec r = sub(numerics::matvec(p.a, x), p.b);  // Ax - b
  const Vec c = numerics::matvec_t(p.a, r);          // A^T(Ax - b)
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > kSupportTol) {
      const double sgn = x[i] > 0.0 ? 1.0 : -1.0;
      worst = std::max(worst, std::abs(c[i] + p.lambda * sgn));
    } else {
      worst = std::max(worst, std::abs(c[i]) - p.lambda);
    }
  }
  return std::max(worst, 0.0);
}

inline double objective_value(const LassoProblem& p, const Vec& x) {
  const Vec r = sub(numerics::matvec(p.a, x), p.b);
  return 0.5 * dot(r, r) + p.lambda * norm1(x);
}

namespace detail {

inline LassoSolution finish(const LassoProblem& p, Vec x, std::size_t iters,
                            bool converged) {
  LassoSolution s;
  s.x_hat = std::move(x);
  for (std::size_t i = 0; i < s.x_hat.size(); ++i)
    if (std::abs(s.x_hat[i]) > kSupportTol) s.support.push_back(i);
  s.residual = sub(numerics::matvec(p.a, s.x_hat), p.b);
  s.objective = 0.5 * dot(s.residual, s.residual) + p.lambda * norm1(s.x_hat);
  s.kkt_residual = kkt_residual(p, s.x_hat);
  s.iterations = iters;
  s.converged = converged;
  return s;
}

}  // namespace detail

// Monotone FISTA with step 1/sigma_max(A)^2. The monotone variant keeps the
// objective nonincreasing while retaining the accelerated rate.
inline LassoSolution solve_lasso_from(const LassoProblem& p, const Vec& x0,
                                      double tol = kDefaultTol,
                                      std::size_t max_iter = kDefaultMaxIter) {
  validate(p);
  if (!(tol > 0.0)) throw std::invalid_argument("lasso: tol must be > 0");
  if (x0.size() != p.a.cols)
    throw std::invalid_argument("lasso: x0 length != cols of A");

  const double smax = numerics::svd(p.a).singular_values.front();
  if (smax == 0.0) return detail::finish(p, Vec(p.a.cols, 0.0), 0, true);
  const double step = 1.0 / (smax * smax);

  Vec x = x0;
  Vec y = x;
  double t = 1.0;
  double fx = objective_value(p, x);

  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    const Vec ry = sub(numerics::matvec(p.a, y), p.b);
    const Vec gy = numerics::matvec_t(p.a, ry);
    Vec z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
      z[i] = soft_threshold(y[i] - step * gy[i], step * p.lambda);

    const Vec rz = sub(numerics::matvec(p.a, z), p.b);
    const double fz = 0.5 * dot(rz, rz) + p.lambda * norm1(z);

    // KKT check at the prox point; one extra A^T matvec per iteration.
    const Vec cz = numerics::matvec_t(p.a, rz);
    double worst = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (std::abs(z[i]) > kSupportTol) {
        const double sgn = z[i] > 0.0 ? 1.0 : -1.0;
        worst = std::max(worst, std::abs(cz[i] + p.lambda * sgn));
      } else {
        worst = std::max(worst, std::abs(cz[i]) - p.lambda);
      }
    }
    if (worst <= tol) return detail::finish(p, z, iter, true);

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Vec x_next;
    double fx_next;
    if (fz <= fx) {
      x_next = z;
      fx_next = fz;
    } else {
      x_next = x;
      fx_next = fx;
    }
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = x_next[i] + (t / t_next) * (z[i] - x_next[i]) +
             ((t - 1.0) / t_next) * (x_next[i] - x[i]);
    x = std::move(x_next);
    fx = fx_next;
    t = t_next;
  }
  return detail::finish(p, x, max_iter, false);
}

inline LassoSolution solve_lasso(const LassoProblem& p, double tol = kDefaultTol,
                                 std::size_t max_iter = kDefaultMaxIter) {
  return solve_lasso_from(p, Vec(p.a.cols, 0.0), tol, max_iter);
}

// Non-degeneracy certificate and the local/global Lipschitz constants of the
// data-to-solution map b -> x_hat.
//
// local_constant = (smax(A_I) + ||A_I^T r / lambda||_2) / smin(A_I)^2 with
// smin taken in the column-Gram sense (A_I has full column rank when the
// rank condition holds). global_constant = Cond(A)/smin(A) + 1/smin(A)^2
// with the row-Gram smin, which is the reading that stays finite for wide
// full-row-rank sensing matrices; it degenerates to +inf otherwise.
struct LipschitzCertificate {
  bool nondegen_rank_ok = false;
  bool nondegen_strict_ok = false;
  double strict_slack = 0.0;  // lambda - ||A_{I^C}^T r||_inf
  double local_constant = 0.0;
  double global_constant = std::numeric_limits<double>::infinity();
  double sigma_min_AI = std::numeric_limits<double>::quiet_NaN();
  double sigma_max_AI = std::numeric_limits<double>::quiet_NaN();
  std::size_t support_size = 0;
  // intermediate step of the global bound, recorded for comparison:
  // (smax(A_I) + 1) / smin(A_I)^2
  double paper_step_constant = 0.0;
};

inline LipschitzCertificate certify(const LassoProblem& p, const LassoSolution& s) {
  if (!s.converged)
    throw std::invalid_argument("certify: solution is not converged");

  LipschitzCertificate cert;
  cert.support_size = s.support.size();

  // strict dual feasibility off the support
  double off_corr = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < p.a.cols; ++j) {
    if (k < s.support.size() && s.support[k] == j) {
      ++k;
      continue;
    }
    double c = 0.0;
    for (std::size_t i = 0; i < p.a.rows; ++i) c += p.a(i, j) * s.residual[i];
    off_corr = std::max(off_corr, std::abs(c));
  }
  cert.strict_slack = p.lambda - off_corr;
  cert.nondegen_strict_ok = cert.strict_slack > 0.0;

  const numerics::SvdResult sva = numerics::svd(p.a);
  const double smin_rg = sva.sigma_min_rowgram;
  cert.global_constant =
      smin_rg > 0.0
          ? sva.cond_rowgram / smin_rg + 1.0 / (smin_rg * smin_rg)
          : std::numeric_limits<double>::infinity();

  if (s.support.empty()) {
    // Constant (zero) map in a neighbourhood of such b.
    cert.nondegen_rank_ok = true;
    cert.local_constant = 0.0;
    cert.paper_step_constant = 0.0;
    return cert;
  }

  const Matrix a_i = numerics::select_columns(p.a, s.support);
  const numerics::SvdResult svi = numerics::svd(a_i);
  cert.sigma_max_AI = svi.singular_values.front();
  cert.sigma_min_AI = svi.sigma_min_colgram;
  cert.nondegen_rank_ok = cert.sigma_min_AI > kRankTol;

  const Vec corr_i = numerics::matvec_t(a_i, s.residual);  // A_I^T r
  const double term = norm2(corr_i) / p.lambda;
  if (cert.nondegen_rank_ok) {
    const double denom = cert.sigma_min_AI * cert.sigma_min_AI;
    cert.local_constant = (cert.sigma_max_AI + term) / denom;
    cert.paper_step_constant = (cert.sigma_max_AI + 1.0) / denom;
  } else {
    cert.local_constant = std::numeric_limits<double>::infinity();
    cert.paper_step_constant = std::numeric_limits<double>::infinity();
  }
  return cert;
}

// Max ratio ||x(b + db) - x(b)|| / ||db|| over a deterministic set of
// perturbations: all +-radius axis directions plus seeded random directions
// up to n_perturb total. Errors out if any perturbation moves the support,
// in which case the caller should shrink the radius.
inline double empirical_local_lipschitz(const LassoProblem& p,
                                        std::size_t n_perturb, double radius,
                                        std::uint64_t seed,
                                        double tol = kDefaultTol) {
  validate(p);
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be > 0");

  const LassoSolution base = solve_lasso(p, tol);
  if (!base.converged) throw NumericalError("empirical_local_lipschitz: base solve did not converge");

  std::vector<Vec> directions;
  for (std::size_t j = 0; j < p.b.size() && directions.size() < n_perturb; ++j) {
    Vec e(p.b.size(), 0.0);
    e[j] = 1.0;
    directions.push_back(e);
    if (directions.size() < n_perturb) {
      Vec en(p.b.size(), 0.0);
      en[j] = -1.0;
      directions.push_back(en);
    }
  }
  rng::Stream s = rng::substream(seed, 0);
  while (directions.size() < n_perturb) {
    Vec d(p.b.size());
    for (double& v : d) v = s.next_gaussian();
    const double n = norm2(d);
    if (n < 1e-12) continue;
    for (double& v : d) v /= n;
    directions.push_back(d);
  }

  double worst = 0.0;
  for (const Vec& d : directions) {
    LassoProblem q = p;
    for (std::size_t i = 0; i < q.b.size(); ++i) q.b[i] += radius * d[i];
    const LassoSolution sol = solve_lasso_from(q, base.x_hat, tol);
    if (!sol.converged)
      throw NumericalError("empirical_local_lipschitz: perturbed solve did not converge");
    if (sol.support != base.support)
      throw NumericalError(
          "empirical_local_lipschitz: support changed under perturbation; "
          "use a smaller radius");
    worst = std::max(worst, norm2(sub(sol.x_hat, base.x_hat)) / radius);
  }
  return worst;
}

}  // namespace darol::lasso
