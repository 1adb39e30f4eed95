#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "darol/error_analysis.hpp"
#include "darol/pipeline.hpp"

namespace darol::cli {

// Self-contained re-runs of every module's invariants at desk scale.
// `verify` prints one pass/fail line per named invariant. --inject-fault
// 'name' deliberately corrupts that check's data to prove the harness can
// fail loudly.
struct VerifyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace verify_detail {

struct Check {
  std::string name;
  std::function<void(bool inject)> body;  // throws InvariantError on failure
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvariantError(what);
}

inline numerics::Matrix random_matrix(std::size_t r, std::size_t c,
                                      std::uint64_t seed) {
  numerics::Matrix m(r, c);
  rng::Stream s = rng::substream(seed, 0);
  for (double& v : m.data) v = s.next_gaussian();
  return m;
}

inline lasso::LassoProblem sensing_problem(std::uint64_t seed, double lambda) {
  const auto map =
      forward::make_linear_map(forward::MapKind::gaussian_sensing, 8, 16, {}, seed);
  forward::PriorSpec prior;
  prior.kind = forward::PriorKind::sparse_spike;
  prior.dimension = 16;
  prior.sparsity = 2;
  rng::Stream s = rng::substream(seed, 1);
  const Vec x_star = forward::sample_one(prior, s);
  Vec b = forward::apply_forward(map, x_star);
  b = forward::add_noise(b, {forward::NoiseKind::gaussian, 0.01}, seed ^ 0x77);
  return {map.a, b, lambda};
}

inline bayes::BayesModel quadratic_model() {
  bayes::BayesModel model;
  model.prior.kind = forward::PriorKind::uniform_box;
  model.prior.dimension = 1;
  model.prior.box_radius = 1.0;
  model.potential = [](const Vec& a, const Vec& m) {
    const double d = a[0] - m[0];
    return 0.5 * d * d;
  };
  model.m1 = [](double) { return 0.0; };
  model.m2 = [](double t) { return t + 1.0; };
  model.potential_sup = 2.0;
  model.measurement_dim = 1;
  model.measurement_radius = 1.0;
  return model;
}

inline std::vector<Check> all_checks() {
  std::vector<Check> checks;

  checks.push_back({"numerics.svd_reconstruction", [](bool inject) {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      numerics::Matrix m = random_matrix(6, 9, seed);
      const numerics::SvdFactorization f = numerics::svd_factor(m);
      if (inject) m.data[0] += 1e-3;
      double err = 0.0;
      for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < f.s.size(); ++k)
            s += f.u(i, k) * f.s[k] * f.v(j, k);
          const double d = s - m(i, j);
          err += d * d;
        }
      require(std::sqrt(err) <= 1e-10 * numerics::frobenius_norm(m),
              "svd reconstruction error above 1e-10 * ||m||_F");
    }
  }});

  checks.push_back({"numerics.submatrix_chains", [](bool inject) {
    rng::Stream s = rng::substream(5150, 0);
    for (int trial = 0; trial < 100; ++trial) {
      const numerics::Matrix x = random_matrix(6, 10, 9000 + trial);
      std::vector<std::size_t> cols(10);
      std::iota(cols.begin(), cols.end(), 0);
      s.shuffle(cols);
      cols.resize(1 + s.next_below(9));
      const auto rep = numerics::submatrix_singular_report(x, cols);
      const double min_slack = inject ? 1.0 : -1e-9;  // unattainable when injected
      require(rep.sigma_max_holds && rep.sigma_min_holds && rep.cond_holds &&
                  rep.sigma_min_slack >= min_slack,
              "a singular-value chain failed on a random split");
    }
  }});

  checks.push_back({"forward.linearity", [](bool inject) {
    const auto map =
        forward::make_linear_map(forward::MapKind::gaussian_sensing, 10, 14, {}, 5);
    rng::Stream s = rng::substream(6, 0);
    for (int t = 0; t < 25; ++t) {
      Vec x(14), y(14);
      for (double& v : x) v = s.next_gaussian();
      for (double& v : y) v = s.next_gaussian();
      const double alpha = s.next_uniform(-2.0, 2.0);
      const double beta = s.next_uniform(-2.0, 2.0);
      Vec combo(14);
      for (std::size_t i = 0; i < 14; ++i) combo[i] = alpha * x[i] + beta * y[i];
      const Vec lhs = forward::apply_forward(map, combo);
      const Vec fx = forward::apply_forward(map, x);
      const Vec fy = forward::apply_forward(map, y);
      for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double rhs = alpha * fx[i] + beta * fy[i] + (inject ? 1e-6 : 0.0);
        require(std::abs(lhs[i] - rhs) <= 1e-12 * (1.0 + std::abs(rhs)),
                "forward map is not linear to 1e-12");
      }
    }
  }});

  checks.push_back({"forward.elliptic_order", [](bool inject) {
    Vec errors;
    for (std::size_t n : {31u, 63u, 127u}) {
      forward::EllipticModel model;
      model.grid_size = n;
      model.coeff_cells = 1;
      model.source.resize(n);
      const double h = 1.0 / static_cast<double>(n + 1);
      for (std::size_t j = 0; j < n; ++j) {
        const double x = h * static_cast<double>(j + 1);
        model.source[j] = std::numbers::pi * std::numbers::pi *
                          std::sin(std::numbers::pi * x);
      }
      model.sensor_indices = {(n + 1) / 2 - 1};
      const Vec u = forward::solve_elliptic(model, {1.0});
      errors.push_back(std::abs(u[0] - 1.0) + (inject ? 1e-3 : 0.0));
    }
    require(std::log2(errors[0] / errors[1]) >= 1.9 &&
                std::log2(errors[1] / errors[2]) >= 1.9,
            "elliptic solver convergence order below 1.9");
  }});

  checks.push_back({"forward.sampling_pure", [](bool inject) {
    forward::PriorSpec spec;
    spec.kind = forward::PriorKind::uniform_box;
    spec.dimension = 4;
    const auto a = forward::sample_prior(spec, 64, 11);
    auto b = forward::sample_prior(spec, 64, 11);
    if (inject) b[0][0] += 1e-9;
    require(a == b, "prior sampling is not a pure function of (spec, n, seed)");
    const auto c = forward::sample_prior(spec, 8, 11);
    for (std::size_t i = 0; i < 8; ++i)
      require(a[i] == c[i], "per-sample substreams depend on n");
  }});

  checks.push_back({"lasso.kkt", [](bool inject) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const lasso::LassoProblem p = sensing_problem(seed, 0.05);
      lasso::LassoSolution s = lasso::solve_lasso(p);
      require(s.converged, "solver failed to converge");
      if (inject) s.x_hat[0] += 1e-6;
      require(lasso::kkt_residual(p, s.x_hat) <= lasso::kDefaultTol,
              "KKT residual above 1e-10 at a converged solution");
    }
  }});

  checks.push_back({"lasso.homogeneity", [](bool inject) {
    for (std::uint64_t seed : {3u, 4u, 5u}) {
      const lasso::LassoProblem p = sensing_problem(seed, 0.08);
      const auto s1 = lasso::solve_lasso(p, 1e-12);
      lasso::LassoProblem q = p;
      const double t = 3.0;
      q.lambda *= t;
      for (double& v : q.b) v *= t;
      const auto s2 = lasso::solve_lasso(q, 1e-12 * t);
      Vec scaled = scale(s1.x_hat, t);
      if (inject) scaled[0] += 1e-5;
      require(norm2(sub(s2.x_hat, scaled)) <=
                  1e-8 * std::max(1.0, norm2(scaled)),
              "positive homogeneity (t b, t lambda) -> t x failed");
    }
  }});

  checks.push_back({"lasso.local_bound", [](bool inject) {
    int tested = 0;
    for (std::uint64_t seed = 200; seed < 215 && tested < 10; ++seed) {
      const lasso::LassoProblem p = sensing_problem(seed, 0.05);
      const auto s = lasso::solve_lasso(p);
      if (!s.converged) continue;
      const auto cert = lasso::certify(p, s);
      if (!(cert.nondegen_rank_ok && cert.nondegen_strict_ok)) continue;
      double radius = 1e-2;
      for (;;) {
        try {
          const double est = lasso::empirical_local_lipschitz(p, 18, radius, seed);
          require(est <= cert.local_constant * (1.0 + 1e-6) + (inject ? -1e9 : 0.0),
                  "empirical local slope exceeded the certified constant");
          ++tested;
          break;
        } catch (const NumericalError&) {
          radius *= 0.25;
          if (radius < 1e-8) break;
        }
      }
    }
    require(tested >= 5, "not enough certified instances");
  }});

  checks.push_back({"bayes.cm_vs_quadrature", [](bool inject) {
    const bayes::BayesModel model = quadratic_model();
    const auto r = bayes::conditional_mean(model, {0.8}, 20000, 1, 0.8);
    const Vec q = bayes::quadrature_cm(model, {0.8}, 20001);
    const double gap = std::abs(r.a_hat[0] - q[0]) + (inject ? 1.0 : 0.0);
    require(gap <= 3.0 * r.mc_std_error[0],
            "MCMC conditional mean disagrees with quadrature beyond 3 SE");
  }});

  checks.push_back({"bayes.hull", [](bool inject) {
    const bayes::BayesModel model = quadratic_model();
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto r = bayes::conditional_mean(model, {0.9}, 4000, seed, 0.7);
      require(std::abs(r.a_hat[0]) <= 1.0 + (inject ? -2.0 : 0.0),
              "conditional mean left the prior hull");
    }
  }});

  checks.push_back({"bayes.determinism", [](bool inject) {
    const bayes::BayesModel model = quadratic_model();
    const auto a = bayes::conditional_mean(model, {0.4}, 4000, 11, 0.8);
    auto b = bayes::conditional_mean(model, {0.4}, 4000, 11, 0.8);
    if (inject) b.a_hat[0] += 1e-12;
    require(a.a_hat == b.a_hat, "identical chains produced different estimates");
  }});

  checks.push_back({"dataset.roundtrip", [](bool inject) {
    data::ForwardModel fwd;
    fwd.linear = forward::make_linear_map(forward::MapKind::gaussian_sensing,
                                          8, 16, {}, 3);
    forward::PriorSpec prior;
    prior.kind = forward::PriorKind::sparse_spike;
    prior.dimension = 16;
    prior.sparsity = 2;
    const auto ds = data::build_regularized(
        fwd, prior, {forward::NoiseKind::gaussian, 0.01},
        data::LassoRegularizer{0.05}, 20, 77);
    const std::string path1 =
        (std::filesystem::temp_directory_path() / "darol_verify_rt.txt").string();
    data::save(ds, path1);
    data::RegularizedDataset loaded = data::load(path1);
    if (inject) loaded.targets[0][0] += 1e-9;
    const std::string path2 =
        (std::filesystem::temp_directory_path() / "darol_verify_rt2.txt").string();
    data::save(loaded, path2);
    require(io::read_file(path1) == io::read_file(path2),
            "save/load/save is not byte identical");
    std::filesystem::remove(path1);
    std::filesystem::remove(path2);
  }});

  checks.push_back({"dataset.kkt_recheck", [](bool inject) {
    data::ForwardModel fwd;
    fwd.linear = forward::make_linear_map(forward::MapKind::gaussian_sensing,
                                          8, 16, {}, 9);
    forward::PriorSpec prior;
    prior.kind = forward::PriorKind::sparse_spike;
    prior.dimension = 16;
    prior.sparsity = 2;
    const double lambda = 0.05;
    const auto ds = data::build_regularized(
        fwd, prior, {forward::NoiseKind::gaussian, 0.01},
        data::LassoRegularizer{lambda}, 25, 13);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      Vec x = ds.targets[i];
      if (inject) x[0] += 1e-6;
      const lasso::LassoProblem p{fwd.linear.a, ds.inputs[i], lambda};
      require(lasso::kkt_residual(p, x) <= lasso::kDefaultTol,
              "a stored pair fails its KKT recheck");
    }
  }});

  checks.push_back({"nn.gradcheck", [](bool inject) {
    for (std::uint64_t seed : {31u, 32u, 33u}) {
      nn::MlpOperator net = nn::init_network(3, 2, 5, 2, 50.0, seed);
      rng::Stream s = rng::substream(seed, 77);
      std::vector<Vec> inputs(6, Vec(3)), targets(6, Vec(2));
      for (auto& v : inputs)
        for (double& x : v) x = s.next_gaussian();
      for (auto& v : targets)
        for (double& x : v) x = s.next_gaussian();
      std::vector<std::size_t> batch(6);
      std::iota(batch.begin(), batch.end(), 0);
      const auto [loss, grad] = nn::loss_and_grad(net, inputs, targets, batch);
      // spot-check a handful of coordinates against central differences
      const double h = 1e-5;
      for (std::size_t k = 0; k < 12; ++k) {
        auto& w = net.subnets[k % 2].weights[k % 3];
        const std::size_t idx = k % w.data.size();
        const double saved = w.data[idx];
        w.data[idx] = saved + h;
        const double up = nn::mean_squared_error(net, inputs, targets);
        w.data[idx] = saved - h;
        const double down = nn::mean_squared_error(net, inputs, targets);
        w.data[idx] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double bp =
            grad.subnets[k % 2].weights[k % 3].data[idx] + (inject ? 1e-2 : 0.0);
        require(std::abs(fd - bp) / std::max({1e-4, std::abs(fd), std::abs(bp)}) <
                    1e-5,
                "backprop gradient disagrees with finite differences");
      }
    }
  }});

  checks.push_back({"nn.clamp", [](bool inject) {
    const nn::MlpOperator net = nn::init_network(3, 2, 16, 2, 0.5, 1);
    rng::Stream s = rng::substream(2, 0);
    for (int t = 0; t < 10000; ++t) {
      Vec m(3);
      for (double& x : m) x = 100.0 * s.next_gaussian();
      for (double v : nn::forward(net, m))
        require(std::abs(v) <= 0.5 + (inject ? -1.0 : 1e-12),
                "output clamp violated");
    }
  }});

  checks.push_back({"nn.train_determinism", [](bool inject) {
    rng::Stream s = rng::substream(10, 0);
    std::vector<Vec> inputs(32, Vec(2));
    for (auto& v : inputs)
      for (double& x : v) x = s.next_gaussian();
    nn::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 12;
    nn::MlpOperator n1 = nn::init_network(2, 2, 8, 2, 2.0, 1);
    nn::MlpOperator n2 = nn::init_network(2, 2, 8, 2, 2.0, 1);
    nn::train(n1, inputs, inputs, cfg);
    nn::train(n2, inputs, inputs, cfg);
    if (inject) n2.subnets[0].weights[0].data[0] += 1e-15;
    for (std::size_t sub = 0; sub < n1.subnets.size(); ++sub)
      for (std::size_t l = 0; l < n1.subnets[sub].weights.size(); ++l)
        require(n1.subnets[sub].weights[l].data == n2.subnets[sub].weights[l].data,
                "training is not bit-deterministic");
  }});

  checks.push_back({"error.decomposition", [](bool inject) {
    const nn::MlpOperator net = nn::init_network(2, 2, 8, 2, 2.0, 5);
    data::RegularizedDataset train, test;
    train.d_m = train.d_a = test.d_m = test.d_a = 2;
    rng::Stream s = rng::substream(6, 0);
    for (int i = 0; i < 50; ++i) {
      Vec m{s.next_gaussian(), s.next_gaussian()};
      Vec a{s.next_gaussian(), s.next_gaussian()};
      (i % 2 ? train : test).inputs.push_back(m);
      (i % 2 ? train : test).targets.push_back(a);
    }
    const auto err = analysis::empirical_errors(net, train, test);
    const double resid = err.learning_error_hat -
                         (err.approx_error_hat + err.gen_gap_hat) +
                         (inject ? 1e-9 : 0.0);
    require(std::abs(resid) <= 1e-12, "learning != approx + gap");
  }});

  checks.push_back({"error.bound_regression", [](bool inject) {
    const double ba = analysis::bound_approximation(2, 1, 1, 1, 10, 10);
    require(std::abs(ba - 0.0722) <= 1e-15 + (inject ? -1.0 : 0.0),
            "approximation bound regression value drifted");
    const double bg = analysis::bound_generalization(1, 1, 1, 1, 2, 1, 100);
    require(std::abs(bg - 2.664174755704633) <= 1e-12,
            "generalization bound regression value drifted");
  }});

  checks.push_back({"error.bound_monotonicity", [](bool inject) {
    double prev = 1e300;
    for (double n : {10.0, 100.0, 1000.0}) {
      const double b =
          analysis::bound_generalization(2, 1, 1, 1.5, 2, 1.2, n) +
          (inject && n > 10 ? 1e3 : 0.0);
      require(b < prev, "generalization bound is not decreasing in n");
      prev = b;
    }
    const double b1 = analysis::bound_approximation(3, 2, 1, 1, 4, 9);
    const double b2 = analysis::bound_approximation(3, 2, 1, 1, 9, 4);
    require(std::abs(b1 - b2) <= 1e-15 * b1,
            "approximation bound is not symmetric in p and L");
  }});

  return checks;
}

}  // namespace verify_detail

inline std::vector<VerifyResult> run_verify(const std::string& inject_fault = "") {
  std::vector<VerifyResult> results;
  bool fault_matched = inject_fault.empty();
  for (const auto& check : verify_detail::all_checks()) {
    const bool inject = check.name == inject_fault;
    fault_matched = fault_matched || inject;
    VerifyResult r;
    r.name = check.name;
    try {
      check.body(inject);
      r.passed = true;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    results.push_back(std::move(r));
  }
  if (!fault_matched)
    throw ConfigError("verify: unknown invariant '" + inject_fault + "'");
  return results;
}

}  // namespace darol::cli
