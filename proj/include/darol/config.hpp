#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "darol/dataset.hpp"
#include "darol/train.hpp"

namespace darol::cli {

using nlohmann::json;

// One experiment = one JSON document. No environment variables and no
// hidden defaults that matter for reproducibility: the master seed is
// required and every derived artifact embeds hash(config) + seed.
struct PipelineConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string output_dir;

  data::ForwardModel forward;
  forward::PriorSpec prior;
  forward::NoiseSpec noise;
  data::Regularizer regularizer = data::LassoRegularizer{};

  std::size_t train_n = 100;
  std::size_t test_n = 100;

  std::size_t net_width = 32;
  std::size_t net_depth = 2;
  double net_clamp = 2.0;
  double frobenius_cap = 0.0;

  nn::TrainConfig training;

  double p_tilde = 10.0;
  double l_tilde = 10.0;
  double c = 1.0;
  double c_tilde = 1.0;

  struct Sweep {
    std::vector<std::size_t> train_sizes;
    std::size_t seeds = 1;
  };
  std::optional<Sweep> sweep;

  json raw;  // canonical parsed document, used for hashing and embedding
};

inline std::string config_hash(const json& raw) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(raw.dump())));
  return buf;
}

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config " + path + ": " + what);
}

inline const json& need(const json& obj, const std::string& path,
                        const std::string& key) {
  if (!obj.is_object() || !obj.contains(key)) fail(path + "/" + key, "missing");
  return obj.at(key);
}

inline double need_number(const json& obj, const std::string& path,
                          const std::string& key) {
  const json& v = need(obj, path, key);
  if (!v.is_number()) fail(path + "/" + key, "must be a number");
  return v.get<double>();
}

inline std::size_t need_count(const json& obj, const std::string& path,
                              const std::string& key, std::size_t min = 1) {
  const json& v = need(obj, path, key);
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min))
    fail(path + "/" + key, "must be an integer >= " + std::to_string(min));
  return v.get<std::size_t>();
}

inline std::string need_string(const json& obj, const std::string& path,
                               const std::string& key) {
  const json& v = need(obj, path, key);
  if (!v.is_string()) fail(path + "/" + key, "must be a string");
  return v.get<std::string>();
}

inline double opt_number(const json& obj, const std::string& path,
                         const std::string& key, double fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "/" + key, "must be a number");
  return v.get<double>();
}

inline Vec number_array(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "must be a non-empty array");
  Vec out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(path, "must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline forward::PriorSpec parse_prior(const json& p, const std::string& path) {
  forward::PriorSpec spec;
  const std::string kind = need_string(p, path, "kind");
  if (kind == "uniform_box") spec.kind = forward::PriorKind::uniform_box;
  else if (kind == "truncated_gaussian") spec.kind = forward::PriorKind::truncated_gaussian;
  else if (kind == "sparse_spike") spec.kind = forward::PriorKind::sparse_spike;
  else fail(path + "/kind", "unknown prior kind '" + kind + "'");
  spec.dimension = need_count(p, path, "dimension");
  if (spec.kind == forward::PriorKind::sparse_spike) {
    spec.sparsity = need_count(p, path, "sparsity");
    spec.amp_min = opt_number(p, path, "amp_min", 0.5);
    spec.amp_max = opt_number(p, path, "amp_max", 1.5);
  } else {
    spec.box_radius = opt_number(p, path, "radius", 1.0);
    spec.box_center = opt_number(p, path, "center", 0.0);
    if (spec.kind == forward::PriorKind::truncated_gaussian)
      spec.gauss_std = opt_number(p, path, "std", 1.0);
  }
  try {
    forward::validate(spec);
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return spec;
}

inline data::ForwardModel parse_forward(const json& f, const std::string& path,
                                        std::uint64_t seed) {
  data::ForwardModel model;
  const std::string kind = need_string(f, path, "kind");
  if (kind == "elliptic") {
    model.kind = data::ForwardModel::Kind::elliptic;
    forward::EllipticModel& e = model.elliptic;
    e.grid_size = need_count(f, path, "grid_size");
    e.coeff_cells = need_count(f, path, "coeff_cells");
    const json& sensors = need(f, path, "sensor_indices");
    if (!sensors.is_array() || sensors.empty())
      fail(path + "/sensor_indices", "must be a non-empty array");
    for (const auto& s : sensors) {
      if (!s.is_number_integer() || s.get<long long>() < 0)
        fail(path + "/sensor_indices", "entries must be nonnegative integers");
      e.sensor_indices.push_back(s.get<std::size_t>());
    }
    const json& src = need(f, path, "source");
    if (src.is_number()) {
      e.source.assign(e.grid_size, src.get<double>());
    } else {
      e.source = number_array(src, path + "/source");
      if (e.source.size() != e.grid_size)
        fail(path + "/source", "length must equal grid_size");
    }
    e.coeff_floor = opt_number(f, path, "coeff_floor", 1e-3);
    try {
      forward::validate(e);
    } catch (const std::invalid_argument& ex) {
      fail(path, ex.what());
    }
    return model;
  }

  model.kind = data::ForwardModel::Kind::linear;
  const std::size_t d_m = need_count(f, path, "d_m");
  const std::size_t d_a = need_count(f, path, "d_a");
  forward::MapParams params;
  forward::MapKind mk;
  if (kind == "gaussian_sensing") {
    mk = forward::MapKind::gaussian_sensing;
  } else if (kind == "diagonal") {
    mk = forward::MapKind::diagonal;
    params.diag = number_array(need(f, path, "diag"), path + "/diag");
  } else if (kind == "identity") {
    mk = forward::MapKind::diagonal;
    params.diag.assign(d_a, 1.0);
  } else if (kind == "convolution_toeplitz") {
    mk = forward::MapKind::convolution_toeplitz;
    params.kernel = number_array(need(f, path, "kernel"), path + "/kernel");
  } else {
    fail(path + "/kind", "unknown forward kind '" + kind + "'");
  }
  try {
    model.linear = forward::make_linear_map(mk, d_m, d_a, params, seed);
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return model;
}

}  // namespace detail

inline PipelineConfig parse_config(const json& doc) {
  using namespace detail;
  PipelineConfig cfg;
  cfg.raw = doc;
  cfg.experiment = need_string(doc, "", "experiment");
  const json& seed = need(doc, "", "seed");
  if (!seed.is_number_integer() || seed.get<long long>() < 0)
    fail("/seed", "master seed must be a nonnegative integer");
  cfg.seed = seed.get<std::uint64_t>();
  cfg.output_dir = doc.contains("output_dir")
                       ? need_string(doc, "", "output_dir")
                       : ("out/" + cfg.experiment);

  cfg.prior = parse_prior(need(doc, "", "prior"), "/prior");
  // the sensing matrix, when random, is drawn from the master seed
  cfg.forward = parse_forward(need(doc, "", "forward"), "/forward",
                              rng::derive_key(cfg.seed, 0xF0));
  if (cfg.prior.dimension != cfg.forward.d_a())
    fail("/prior/dimension", "must equal the forward map's d_a");

  const json& noise = need(doc, "", "noise");
  const std::string nk = need_string(noise, "/noise", "kind");
  if (nk == "none") cfg.noise.kind = forward::NoiseKind::none;
  else if (nk == "gaussian") cfg.noise.kind = forward::NoiseKind::gaussian;
  else fail("/noise/kind", "unknown noise kind '" + nk + "'");
  cfg.noise.std = opt_number(noise, "/noise", "std", 0.0);
  if (cfg.noise.std < 0.0) fail("/noise/std", "must be >= 0");

  const json& reg = need(doc, "", "regularizer");
  const std::string rk = need_string(reg, "/regularizer", "kind");
  if (rk == "lasso") {
    data::LassoRegularizer lr;
    lr.lambda = need_number(reg, "/regularizer", "lambda");
    if (!(lr.lambda > 0.0)) fail("/regularizer/lambda", "must be > 0");
    lr.tol = opt_number(reg, "/regularizer", "tol", lasso::kDefaultTol);
    lr.max_iter = static_cast<std::size_t>(
        opt_number(reg, "/regularizer", "max_iter",
                   static_cast<double>(lasso::kDefaultMaxIter)));
    cfg.regularizer = lr;
  } else if (rk == "bayes_cm") {
    data::BayesCmRegularizer br;
    br.chain_length = static_cast<std::size_t>(
        opt_number(reg, "/regularizer", "chain_length", 20000.0));
    br.proposal_std = opt_number(reg, "/regularizer", "proposal_std", 0.0);
    br.likelihood_std =
        opt_number(reg, "/regularizer", "likelihood_std",
                   cfg.noise.std > 0.0 ? cfg.noise.std : 0.1);
    if (!(br.likelihood_std > 0.0))
      fail("/regularizer/likelihood_std", "must be > 0");
    cfg.regularizer = br;
  } else {
    fail("/regularizer/kind", "unknown regularizer '" + rk + "'");
  }

  const json& ds = need(doc, "", "dataset");
  cfg.train_n = need_count(ds, "/dataset", "train_n");
  cfg.test_n = need_count(ds, "/dataset", "test_n");

  const json& net = need(doc, "", "network");
  cfg.net_width = need_count(net, "/network", "width");
  cfg.net_depth = need_count(net, "/network", "depth");
  cfg.net_clamp = need_number(net, "/network", "clamp");
  if (!(cfg.net_clamp > 0.0)) fail("/network/clamp", "must be > 0");
  cfg.frobenius_cap = opt_number(net, "/network", "frobenius_cap", 0.0);
  if (cfg.frobenius_cap < 0.0) fail("/network/frobenius_cap", "must be >= 0");

  const json& tr = need(doc, "", "training");
  const std::string opt = need_string(tr, "/training", "optimizer");
  if (opt == "sgd") cfg.training.optimizer = nn::Optimizer::sgd;
  else if (opt == "adaptive") cfg.training.optimizer = nn::Optimizer::adaptive;
  else fail("/training/optimizer", "unknown optimizer '" + opt + "'");
  cfg.training.step_size = need_number(tr, "/training", "step_size");
  if (!(cfg.training.step_size > 0.0)) fail("/training/step_size", "must be > 0");
  cfg.training.batch_size = need_count(tr, "/training", "batch_size");
  cfg.training.epochs = need_count(tr, "/training", "epochs", 0);
  cfg.training.frobenius_cap = cfg.frobenius_cap;

  if (doc.contains("bounds")) {
    const json& b = doc.at("bounds");
    cfg.p_tilde = opt_number(b, "/bounds", "p_tilde", 10.0);
    cfg.l_tilde = opt_number(b, "/bounds", "l_tilde", 10.0);
    cfg.c = opt_number(b, "/bounds", "c", 1.0);
    cfg.c_tilde = opt_number(b, "/bounds", "c_tilde", 1.0);
  }

  if (doc.contains("sweep")) {
    const json& sw = doc.at("sweep");
    PipelineConfig::Sweep sweep;
    for (const auto& v : need(sw, "/sweep", "train_sizes")) {
      if (!v.is_number_integer() || v.get<long long>() < 1)
        fail("/sweep/train_sizes", "entries must be positive integers");
      sweep.train_sizes.push_back(v.get<std::size_t>());
    }
    if (sweep.train_sizes.empty()) fail("/sweep/train_sizes", "must be non-empty");
    sweep.seeds = need_count(sw, "/sweep", "seeds");
    cfg.sweep = sweep;
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  const std::string text = io::read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace darol::cli
