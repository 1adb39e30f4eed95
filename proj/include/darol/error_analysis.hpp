#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "darol/bayes.hpp"
#include "darol/dataset.hpp"
#include "darol/mlp.hpp"

namespace darol::analysis {

// Empirical learning-error decomposition. gen_gap_hat is defined as
// learning_error_hat - approx_error_hat, so the decomposition identity holds
// to machine precision whenever all three come from the same realization.
struct ErrorReport {
  double approx_error_hat = 0.0;    // train-set MSE against the targets
  double gen_gap_hat = 0.0;         // test risk minus train risk
  double learning_error_hat = 0.0;  // test-set MSE against the targets

  double bound_approx = 0.0;
  double bound_gen = 0.0;
  double bound_learning = 0.0;
  double bound_approx_certified = 0.0;    // same bound with the certified L_f
  double bound_learning_certified = 0.0;

  double lf_empirical = 0.0;
  double lf_certified = 0.0;
};

inline ErrorReport empirical_errors(const nn::MlpOperator& net,
                                    const data::RegularizedDataset& train,
                                    const data::RegularizedDataset& test) {
  if (train.size() == 0 || test.size() == 0)
    throw std::invalid_argument("empirical_errors: empty dataset");
  if (train.d_m != test.d_m || train.d_a != test.d_a)
    throw std::invalid_argument("empirical_errors: train/test dimension mismatch");
  if (train.d_m != net.d_in || train.d_a != net.d_out)
    throw std::invalid_argument("empirical_errors: network dimension mismatch");
  ErrorReport r;
  r.approx_error_hat = nn::mean_squared_error(net, train.inputs, train.targets);
  r.learning_error_hat = nn::mean_squared_error(net, test.inputs, test.targets);
  r.gen_gap_hat = r.learning_error_hat - r.approx_error_hat;
  return r;
}

// 361 d_m d_a L_f^2 r_M^2 (pL)^{-4/d_m}
inline double bound_approximation(double d_m, double d_a, double l_f, double r_m,
                                  double p, double l) {
  if (d_m < 1 || d_a < 1 || p <= 0 || l <= 0)
    throw std::invalid_argument("bound_approximation: inputs must be positive");
  return 361.0 * d_m * d_a * l_f * l_f * r_m * r_m *
         std::pow(p, -4.0 / d_m) * std::pow(l, -4.0 / d_m);
}

// 8 d_a (r_A + r_F) r_M sqrt(2 ln2 L) M_F^L / sqrt(n)
inline double bound_generalization(double d_a, double r_a, double r_f, double r_m,
                                   double l, double m_f, double n) {
  if (n < 1) throw std::invalid_argument("bound_generalization: n must be >= 1");
  return 8.0 * d_a * (r_a + r_f) * r_m * std::sqrt(2.0 * std::log(2.0) * l) *
         std::pow(m_f, l) / std::sqrt(n);
}

// c d_a sqrt(d_m) r_M^2 ( L_f^2 d_m^E (p L)^{-4/d_m} + L_f sqrt(L) M_F^{c~ d_m}/sqrt(n) )
// with E = (d_m^2 - 9 d_m + 4) / (2 d_m (d_m - 1)). The exponent is singular
// at d_m = 1, so that case is rejected. c and c_tilde are unpinned absolute
// constants; values computed here are for trend comparison only.
inline double bound_learning(double d_m, double d_a, double l_f, double r_m,
                             double m_f, double p_tilde, double l_tilde,
                             double n, double c = 1.0, double c_tilde = 1.0) {
  if (d_m < 2)
    throw std::invalid_argument(
        "bound_learning: requires d_m >= 2 (exponent undefined at d_m = 1)");
  if (d_a < 1 || p_tilde <= 0 || l_tilde <= 0 || n < 1)
    throw std::invalid_argument("bound_learning: inputs must be positive");
  const double expo = (d_m * d_m - 9.0 * d_m + 4.0) / (2.0 * d_m * (d_m - 1.0));
  const double approx_term = l_f * l_f * std::pow(d_m, expo) *
                             std::pow(p_tilde * l_tilde, -4.0 / d_m);
  const double gen_term =
      l_f * std::sqrt(l_tilde) * std::pow(m_f, c_tilde * d_m) / std::sqrt(n);
  return c * d_a * std::sqrt(d_m) * r_m * r_m * (approx_term + gen_term);
}

// r_M sqrt(2 ln2 L) M_F^L / sqrt(n): the network-class complexity term the
// generalization bound is built from; criterion for the sampled-class
// Rademacher estimate.
inline double rademacher_network_bound(double r_m, double l, double m_f,
                                       double n) {
  return r_m * std::sqrt(2.0 * std::log(2.0) * l) * std::pow(m_f, l) /
         std::sqrt(n);
}

using ScalarFn = std::function<double(const Vec&)>;

struct RademacherEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo estimate of E[sup_g (1/n) sum_i sigma_i g(z_i)] with the sup
// over the sampled members only. A finite sample of the class makes this a
// lower-bound estimator of the true complexity.
inline RademacherEstimate empirical_rademacher(
    const std::vector<ScalarFn>& class_sample, const std::vector<Vec>& data,
    std::size_t n_sign_draws, std::uint64_t seed) {
  if (class_sample.empty())
    throw std::invalid_argument("empirical_rademacher: empty class sample");
  if (data.empty() || n_sign_draws < 1)
    throw std::invalid_argument("empirical_rademacher: need data and draws");

  const std::size_t g = class_sample.size();
  const std::size_t n = data.size();
  std::vector<Vec> values(g, Vec(n));
  for (std::size_t k = 0; k < g; ++k)
    for (std::size_t i = 0; i < n; ++i) values[k][i] = class_sample[k](data[i]);

  rng::Stream stream = rng::substream(seed, 0);
  double sum = 0.0, sum_sq = 0.0;
  Vec sigma(n);
  for (std::size_t t = 0; t < n_sign_draws; ++t) {
    for (double& s : sigma) s = (stream.next_u64() & 1ULL) ? 1.0 : -1.0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += sigma[i] * values[k][i];
      best = std::max(best, acc / static_cast<double>(n));
    }
    sum += best;
    sum_sq += best * best;
  }
  RademacherEstimate est;
  const double t = static_cast<double>(n_sign_draws);
  est.value = sum / t;
  if (n_sign_draws > 1) {
    const double var = (sum_sq - sum * sum / t) / (t - 1.0);
    est.std_error = std::sqrt(std::max(var, 0.0) / t);
  }
  return est;
}

// Pairwise max-slope estimate of the target's Lipschitz constant over a
// sample grid; feeds L_f into the bound evaluations.
inline double lipschitz_of_target(const std::function<Vec(const Vec&)>& map,
                                  const std::vector<Vec>& grid) {
  if (grid.size() < 2)
    throw std::invalid_argument("lipschitz_of_target: need >= 2 grid points");
  return bayes::empirical_lipschitz_map(map, grid, grid.size() * grid.size(), 0);
}

// Same estimator evaluated directly on stored (input, target) pairs.
inline double lipschitz_from_pairs(const std::vector<Vec>& inputs,
                                   const std::vector<Vec>& targets) {
  if (inputs.size() < 2)
    throw std::invalid_argument("lipschitz_from_pairs: need >= 2 pairs");
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = i + 1; j < inputs.size(); ++j) {
      const double dist = norm2(sub(inputs[i], inputs[j]));
      if (dist < 1e-9) continue;
      worst = std::max(worst, norm2(sub(targets[i], targets[j])) / dist);
    }
  }
  return worst;
}

}  // namespace darol::analysis
