#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "darol/bayes.hpp"
#include "darol/elliptic.hpp"
#include "darol/forward.hpp"
#include "darol/lasso.hpp"
#include "darol/parallel.hpp"
#include "darol/prior.hpp"
#include "darol/textio.hpp"

namespace darol::data {

// The forward map of a pipeline is either a dense linear operator or the
// 1-D diffusion solve.
struct ForwardModel {
  enum class Kind { linear, elliptic };
  Kind kind = Kind::linear;
  forward::LinearForwardMap linear;
  forward::EllipticModel elliptic;

  std::size_t d_a() const {
    return kind == Kind::linear ? linear.d_a() : elliptic.coeff_cells;
  }
  std::size_t d_m() const {
    return kind == Kind::linear ? linear.d_m() : elliptic.sensor_indices.size();
  }
  Vec apply(const Vec& a) const {
    return kind == Kind::linear ? forward::apply_forward(linear, a)
                                : forward::solve_elliptic(elliptic, a);
  }
};

enum class DatasetKind { implicit, explicit_inverse, regularized };

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::implicit: return "implicit";
    case DatasetKind::explicit_inverse: return "explicit";
    case DatasetKind::regularized: return "regularized";
  }
  return "?";
}

inline DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "implicit") return DatasetKind::implicit;
  if (s == "explicit") return DatasetKind::explicit_inverse;
  if (s == "regularized") return DatasetKind::regularized;
  throw ConfigError("unknown dataset kind: " + s);
}

struct RegularizedDataset {
  DatasetKind kind = DatasetKind::implicit;
  std::size_t d_m = 0;
  std::size_t d_a = 0;
  std::vector<Vec> inputs;   // m_i
  std::vector<Vec> targets;  // a_i or regularized a_hat_i
  std::uint64_t seed = 0;
  // provenance: forward/prior/noise/regularizer specs, per-pair diagnostics
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return inputs.size(); }
};

struct LassoRegularizer {
  double lambda = 0.1;
  double tol = lasso::kDefaultTol;
  std::size_t max_iter = lasso::kDefaultMaxIter;
};

struct BayesCmRegularizer {
  std::size_t chain_length = 20000;
  double proposal_std = 0.0;   // <= 0: tuned by a pilot run per dataset
  double likelihood_std = 0.1; // noise scale inside the potential
};

using Regularizer = std::variant<LassoRegularizer, BayesCmRegularizer>;

// Substream roles so that parameter draws and noise draws never alias.
namespace stream_role {
inline constexpr std::uint64_t kParameter = 0;
inline constexpr std::uint64_t kNoise = 1ULL << 32;
inline constexpr std::uint64_t kChain = 2ULL << 32;
inline constexpr std::uint64_t kPilot = 3ULL << 32;
}  // namespace stream_role

inline RegularizedDataset build_implicit(const ForwardModel& fwd,
                                         const forward::PriorSpec& prior,
                                         const forward::NoiseSpec& noise,
                                         std::size_t n, std::uint64_t seed) {
  forward::validate(prior);
  if (n < 1) throw std::invalid_argument("build_implicit: n < 1");
  if (prior.dimension != fwd.d_a())
    throw std::invalid_argument("build_implicit: prior dimension != d_a");

  RegularizedDataset ds;
  ds.kind = DatasetKind::implicit;
  ds.d_m = fwd.d_m();
  ds.d_a = fwd.d_a();
  ds.seed = seed;
  ds.inputs.resize(n);
  ds.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream s = rng::substream(seed, stream_role::kParameter + i);
    const Vec a = forward::sample_one(prior, s);
    ds.inputs[i] =
        forward::add_noise(fwd.apply(a), noise, seed ^ (stream_role::kNoise + i));
    ds.targets[i] = a;
  }
  return ds;
}

// Exact inversion is available only for the toy diagonal/identity maps.
inline Vec exact_inverse(const forward::LinearForwardMap& map, const Vec& m) {
  if (map.kind != forward::MapKind::diagonal)
    throw std::invalid_argument(
        "exact_inverse: forward map is not invertible in closed form");
  Vec a(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double d = map.a(i, i);
    if (d == 0.0)
      throw std::invalid_argument("exact_inverse: zero diagonal entry");
    a[i] = m[i] / d;
  }
  return a;
}

// Measurements are sampled from the pushforward of the prior through the
// forward map plus noise, matching the input law of the regularized build.
inline RegularizedDataset build_explicit(const forward::LinearForwardMap& map,
                                         const forward::PriorSpec& prior,
                                         const forward::NoiseSpec& noise,
                                         std::size_t n, std::uint64_t seed) {
  forward::validate(prior);
  if (n < 1) throw std::invalid_argument("build_explicit: n < 1");
  if (map.kind != forward::MapKind::diagonal)
    throw std::invalid_argument(
        "build_explicit: requires an invertible (diagonal) forward map");

  RegularizedDataset ds;
  ds.kind = DatasetKind::explicit_inverse;
  ds.d_m = map.d_m();
  ds.d_a = map.d_a();
  ds.seed = seed;
  ds.inputs.resize(n);
  ds.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream s = rng::substream(seed, stream_role::kParameter + i);
    const Vec a = forward::sample_one(prior, s);
    const Vec m = forward::add_noise(forward::apply_forward(map, a), noise,
                                     seed ^ (stream_role::kNoise + i));
    ds.inputs[i] = m;
    ds.targets[i] = exact_inverse(map, m);
  }
  return ds;
}

// Builds the Bayesian potential Phi(a;m) = ||f(a) - m||^2 / (2 sigma^2)
// together with valid bound functions for it.
inline bayes::BayesModel make_bayes_model(const ForwardModel& fwd,
                                          const forward::PriorSpec& prior,
                                          const BayesCmRegularizer& reg,
                                          double measurement_radius) {
  if (!(reg.likelihood_std > 0.0))
    throw std::invalid_argument("bayes_cm: likelihood_std must be > 0");
  bayes::BayesModel model;
  model.prior = prior;
  model.measurement_dim = fwd.d_m();
  model.measurement_radius = measurement_radius;
  const double inv_two_var = 1.0 / (2.0 * reg.likelihood_std * reg.likelihood_std);
  model.potential = [fwd, inv_two_var](const Vec& a, const Vec& m) {
    const Vec r = sub(fwd.apply(a), m);
    return inv_two_var * dot(r, r);
  };
  // sup of ||f(a)|| over the compact prior support, estimated by sampling
  // with a safety margin; recorded constants, not load-bearing for the CM.
  double sup_f = 0.0;
  for (std::size_t i = 0; i < 512; ++i) {
    rng::Stream s = rng::substream(0x5eedULL, i);
    sup_f = std::max(sup_f, norm2(fwd.apply(forward::sample_one(prior, s))));
  }
  sup_f *= 1.25;
  const double sigma2 = reg.likelihood_std * reg.likelihood_std;
  model.m1 = [](double) { return 0.0; };  // potential is nonnegative
  model.m2 = [sup_f, measurement_radius, sigma2](double) {
    return (sup_f + measurement_radius) / sigma2;
  };
  model.potential_sup =
      (sup_f + measurement_radius) * (sup_f + measurement_radius) * inv_two_var;
  return model;
}

inline RegularizedDataset build_regularized(const ForwardModel& fwd,
                                            const forward::PriorSpec& prior,
                                            const forward::NoiseSpec& noise,
                                            const Regularizer& reg, std::size_t n,
                                            std::uint64_t seed,
                                            std::size_t jobs = 1) {
  forward::validate(prior);
  if (n < 1) throw std::invalid_argument("build_regularized: n < 1");
  if (prior.dimension != fwd.d_a())
    throw std::invalid_argument("build_regularized: prior dimension != d_a");
  const bool is_lasso = std::holds_alternative<LassoRegularizer>(reg);
  if (is_lasso && fwd.kind != ForwardModel::Kind::linear)
    throw std::invalid_argument("build_regularized: lasso requires a linear forward map");

  RegularizedDataset ds;
  ds.kind = DatasetKind::regularized;
  ds.d_m = fwd.d_m();
  ds.d_a = fwd.d_a();
  ds.seed = seed;
  ds.inputs.assign(n, Vec{});
  ds.targets.assign(n, Vec{});

  std::vector<std::string> failures(n);
  nlohmann::json diag = nlohmann::json::object();

  if (is_lasso) {
    const auto& lr = std::get<LassoRegularizer>(reg);
    if (!(lr.lambda > 0.0))
      throw std::invalid_argument("build_regularized: lambda must be > 0");
    std::vector<nlohmann::json> per_pair(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      rng::Stream s = rng::substream(seed, stream_role::kParameter + i);
      const Vec a = forward::sample_one(prior, s);
      const Vec m = forward::add_noise(fwd.apply(a), noise,
                                       seed ^ (stream_role::kNoise + i));
      try {
        lasso::LassoProblem prob{fwd.linear.a, m, lr.lambda};
        const lasso::LassoSolution sol =
            lasso::solve_lasso(prob, lr.tol, lr.max_iter);
        if (!sol.converged)
          throw NumericalError("lasso did not converge");
        const lasso::LipschitzCertificate cert = lasso::certify(prob, sol);
        ds.inputs[i] = m;
        ds.targets[i] = sol.x_hat;
        per_pair[i] = {
            {"iterations", sol.iterations},
            {"kkt_residual", sol.kkt_residual},
            {"support_size", cert.support_size},
            {"rank_ok", cert.nondegen_rank_ok},
            {"strict_ok", cert.nondegen_strict_ok},
            {"strict_slack", cert.strict_slack},
            {"local_constant", cert.local_constant},
        };
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    });
    diag["pairs"] = per_pair;
    std::size_t certified = 0, ok = 0;
    for (const auto& p : per_pair) {
      if (p.is_null()) continue;
      ++ok;
      if (p["rank_ok"].get<bool>() && p["strict_ok"].get<bool>()) ++certified;
    }
    diag["certified_fraction"] =
        ok ? static_cast<double>(certified) / static_cast<double>(ok) : 0.0;
    diag["lambda"] = lr.lambda;
  } else {
    const auto& br = std::get<BayesCmRegularizer>(reg);
    // shared measurement radius estimate for the model constants
    const double r_m = prior.radius() + 4.0 * noise.std + 1.0;
    const bayes::BayesModel model = make_bayes_model(fwd, prior, br, r_m);
    double proposal = br.proposal_std;
    if (!(proposal > 0.0)) {
      rng::Stream s = rng::substream(seed, stream_role::kPilot);
      const Vec a0 = forward::sample_one(prior, s);
      const Vec m0 = fwd.apply(a0);
      proposal = bayes::tune_proposal_std(model, m0, seed ^ stream_role::kPilot);
    }
    std::vector<nlohmann::json> per_pair(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      rng::Stream s = rng::substream(seed, stream_role::kParameter + i);
      const Vec a = forward::sample_one(prior, s);
      const Vec m = forward::add_noise(fwd.apply(a), noise,
                                       seed ^ (stream_role::kNoise + i));
      try {
        const bayes::CmResult cm = bayes::conditional_mean(
            model, m, br.chain_length, seed ^ (stream_role::kChain + i), proposal);
        ds.inputs[i] = m;
        ds.targets[i] = cm.a_hat;
        per_pair[i] = {
            {"acceptance_rate", cm.acceptance_rate},
            {"max_std_error", norm_inf(cm.mc_std_error)},
            {"acceptance_warning", cm.acceptance_warning},
        };
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    });
    diag["pairs"] = per_pair;
    diag["proposal_std"] = proposal;
    diag["chain_length"] = br.chain_length;
  }

  // drop failed pairs; more than 1% failed is a build failure
  std::vector<std::size_t> failed_idx;
  std::vector<Vec> in_ok, tg_ok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) {
      failed_idx.push_back(i);
    } else {
      in_ok.push_back(std::move(ds.inputs[i]));
      tg_ok.push_back(std::move(ds.targets[i]));
    }
  }
  if (static_cast<double>(failed_idx.size()) > 0.01 * static_cast<double>(n)) {
    throw NumericalError("build_regularized: " + std::to_string(failed_idx.size()) +
                         " of " + std::to_string(n) + " pairs failed (> 1%)");
  }
  ds.inputs = std::move(in_ok);
  ds.targets = std::move(tg_ok);
  diag["failed_indices"] = failed_idx;
  ds.meta["regularizer_diagnostics"] = diag;
  return ds;
}

inline constexpr const char* kDatasetMagic = "darol.dataset.v1";

inline void save(const RegularizedDataset& ds, const std::string& path) {
  io::TextArtifact art;
  art.magic = kDatasetMagic;
  art.header["kind"] = to_string(ds.kind);
  art.header["d_m"] = ds.d_m;
  art.header["d_a"] = ds.d_a;
  art.header["n"] = ds.inputs.size();
  art.header["seed"] = ds.seed;
  art.header["meta"] = ds.meta;
  art.rows.reserve(ds.inputs.size());
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
    Vec row = ds.inputs[i];
    row.insert(row.end(), ds.targets[i].begin(), ds.targets[i].end());
    art.rows.push_back(std::move(row));
  }
  io::save_file(art, path);
}

inline RegularizedDataset load(const std::string& path) {
  const io::TextArtifact art = io::load_file(path, kDatasetMagic);
  RegularizedDataset ds;
  ds.kind = dataset_kind_from_string(art.header.at("kind").get<std::string>());
  ds.d_m = art.header.at("d_m").get<std::size_t>();
  ds.d_a = art.header.at("d_a").get<std::size_t>();
  ds.seed = art.header.at("seed").get<std::uint64_t>();
  ds.meta = art.header.value("meta", nlohmann::json::object());
  const auto n = art.header.at("n").get<std::size_t>();
  if (art.rows.size() != n)
    throw ConfigError("dataset load: row count does not match header");
  for (const Vec& row : art.rows) {
    if (row.size() != ds.d_m + ds.d_a)
      throw ConfigError("dataset load: row width does not match dimensions");
    ds.inputs.emplace_back(row.begin(), row.begin() + static_cast<long>(ds.d_m));
    ds.targets.emplace_back(row.begin() + static_cast<long>(ds.d_m), row.end());
  }
  return ds;
}

}  // namespace darol::data
