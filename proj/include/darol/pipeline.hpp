#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "darol/config.hpp"
#include "darol/error_analysis.hpp"
#include "darol/train.hpp"

namespace darol::cli {

namespace stage_seed {
// Stage tags; every stage seed is a pure function of the master seed.
inline constexpr std::uint64_t kTrainData = 0xA1;
inline constexpr std::uint64_t kTestData = 0xA2;
inline constexpr std::uint64_t kNetInit = 0xA3;
inline constexpr std::uint64_t kShuffle = 0xA4;
inline constexpr std::uint64_t kSweep = 0xC0;
}  // namespace stage_seed

struct Paths {
  std::filesystem::path out;
  std::filesystem::path train_dataset() const { return out / "train.dataset.txt"; }
  std::filesystem::path test_dataset() const { return out / "test.dataset.txt"; }
  std::filesystem::path checkpoint() const { return out / "checkpoint.txt"; }
  std::filesystem::path history() const { return out / "history.csv"; }
  std::filesystem::path report() const { return out / "report.txt"; }
  std::filesystem::path sweep() const { return out / "sweep.csv"; }
};

// ---- dataset stage ---------------------------------------------------------

inline data::RegularizedDataset build_dataset(const PipelineConfig& cfg,
                                              std::size_t n, std::uint64_t seed,
                                              std::size_t jobs) {
  data::RegularizedDataset ds = data::build_regularized(
      cfg.forward, cfg.prior, cfg.noise, cfg.regularizer, n, seed, jobs);
  ds.meta["experiment"] = cfg.experiment;
  ds.meta["config_hash"] = config_hash(cfg.raw);
  ds.meta["master_seed"] = cfg.seed;
  return ds;
}

inline void run_gen(const PipelineConfig& cfg, const Paths& paths,
                    std::size_t jobs) {
  std::filesystem::create_directories(paths.out);
  data::RegularizedDataset train = build_dataset(
      cfg, cfg.train_n, rng::derive_key(cfg.seed, stage_seed::kTrainData), jobs);
  train.meta["role"] = "train";
  data::save(train, paths.train_dataset().string());
  data::RegularizedDataset test = build_dataset(
      cfg, cfg.test_n, rng::derive_key(cfg.seed, stage_seed::kTestData), jobs);
  test.meta["role"] = "test";
  data::save(test, paths.test_dataset().string());
}

// ---- checkpoint io ---------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "darol.checkpoint.v1";

inline void save_checkpoint(const nn::MlpOperator& net, const std::string& path,
                            const std::string& cfg_hash, std::uint64_t seed) {
  io::TextArtifact art;
  art.magic = kCheckpointMagic;
  art.header["d_in"] = net.d_in;
  art.header["d_out"] = net.d_out;
  art.header["width"] = net.width;
  art.header["depth"] = net.depth;
  art.header["clamp"] = net.output_clamp;
  art.header["net_seed"] = net.seed;
  art.header["config_hash"] = cfg_hash;
  art.header["master_seed"] = seed;
  for (const auto& sub : net.subnets) {
    for (std::size_t l = 0; l < sub.weights.size(); ++l) {
      Vec row = sub.weights[l].data;
      row.insert(row.end(), sub.biases[l].begin(), sub.biases[l].end());
      art.rows.push_back(std::move(row));
    }
  }
  io::save_file(art, path);
}

inline nn::MlpOperator load_checkpoint(const std::string& path,
                                       std::string* cfg_hash = nullptr,
                                       std::uint64_t* seed = nullptr) {
  const io::TextArtifact art = io::load_file(path, kCheckpointMagic);
  nn::MlpOperator net = nn::init_network(
      art.header.at("d_in").get<std::size_t>(),
      art.header.at("d_out").get<std::size_t>(),
      art.header.at("width").get<std::size_t>(),
      art.header.at("depth").get<std::size_t>(),
      art.header.at("clamp").get<double>(),
      art.header.at("net_seed").get<std::uint64_t>());
  if (cfg_hash) *cfg_hash = art.header.value("config_hash", "");
  if (seed) *seed = art.header.value("master_seed", 0ULL);
  std::size_t r = 0;
  for (auto& sub : net.subnets) {
    for (std::size_t l = 0; l < sub.weights.size(); ++l) {
      if (r >= art.rows.size())
        throw ConfigError("checkpoint: missing parameter rows");
      const Vec& row = art.rows[r++];
      const std::size_t nw = sub.weights[l].data.size();
      if (row.size() != nw + sub.biases[l].size())
        throw ConfigError("checkpoint: row width mismatch");
      std::copy(row.begin(), row.begin() + static_cast<long>(nw),
                sub.weights[l].data.begin());
      std::copy(row.begin() + static_cast<long>(nw), row.end(),
                sub.biases[l].begin());
    }
  }
  if (r != art.rows.size()) throw ConfigError("checkpoint: extra parameter rows");
  return net;
}

// ---- training stage --------------------------------------------------------

struct TrainOutcome {
  nn::MlpOperator net;
  nn::TrainHistory history;
};

inline TrainOutcome run_train_on(const PipelineConfig& cfg,
                                 const data::RegularizedDataset& train,
                                 std::uint64_t net_seed,
                                 std::uint64_t shuffle_seed) {
  TrainOutcome out{
      nn::init_network(train.d_m, train.d_a, cfg.net_width, cfg.net_depth,
                       cfg.net_clamp, net_seed),
      {}};
  nn::TrainConfig tc = cfg.training;
  tc.seed = shuffle_seed;
  out.history = nn::train(out.net, train.inputs, train.targets, tc);
  if (out.history.diverged)
    throw NumericalError("training diverged (loss became non-finite)");
  return out;
}

inline void run_train(const PipelineConfig& cfg, const Paths& paths,
                      const std::string& dataset_path) {
  const data::RegularizedDataset train = data::load(dataset_path);
  const std::string hash = config_hash(cfg.raw);
  if (train.meta.value("config_hash", "") != hash)
    throw ConfigError("train: dataset was generated from a different config");
  const TrainOutcome out =
      run_train_on(cfg, train, rng::derive_key(cfg.seed, stage_seed::kNetInit),
                   rng::derive_key(cfg.seed, stage_seed::kShuffle));
  std::filesystem::create_directories(paths.out);
  save_checkpoint(out.net, paths.checkpoint().string(), hash, cfg.seed);

  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < out.history.epoch_loss.size(); ++e)
    csv += std::to_string(e) + "," + format_double(out.history.epoch_loss[e]) + "\n";
  std::ofstream hist(paths.history(), std::ios::binary);
  if (!hist) throw ConfigError("cannot write " + paths.history().string());
  hist << csv;
}

// ---- report ----------------------------------------------------------------

inline constexpr const char* kReportMagic = "darol.report.v1";

using Report = std::vector<std::pair<std::string, std::string>>;

inline std::string report_value(const Report& report, const std::string& key) {
  for (const auto& [k, v] : report)
    if (k == key) return v;
  throw ConfigError("report: missing key " + key);
}

inline double report_number(const Report& report, const std::string& key) {
  return std::strtod(report_value(report, key).c_str(), nullptr);
}

inline std::string serialize_report(const Report& report) {
  std::string body = std::string(kReportMagic) + "\n";
  for (const auto& [k, v] : report) body += k + " = " + v + "\n";
  body += io::checksum_line(fnv1a64(body));
  body += '\n';
  return body;
}

inline Report parse_report(const std::string& text) {
  const std::size_t first_nl = text.find('\n');
  if (first_nl == std::string::npos || text.substr(0, first_nl) != kReportMagic)
    throw ConfigError("report: bad magic line");
  const std::size_t check_pos = text.rfind("checksum fnv1a64 ");
  if (check_pos == std::string::npos)
    throw ConfigError("report: missing checksum");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text.data(), check_pos)));
  if (text.substr(check_pos + 17, 16) != buf)
    throw ConfigError("report: checksum mismatch");
  Report report;
  std::istringstream lines(text.substr(first_nl + 1, check_pos - first_nl - 1));
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    report.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  return report;
}

// Certified Lipschitz constant of the regularized inverse, when one exists.
inline double certified_lipschitz(const PipelineConfig& cfg) {
  if (std::holds_alternative<data::LassoRegularizer>(cfg.regularizer)) {
    if (cfg.forward.kind != data::ForwardModel::Kind::linear)
      return std::numeric_limits<double>::infinity();
    const numerics::SvdResult s = numerics::svd(cfg.forward.linear.a);
    const double smin = s.sigma_min_rowgram;
    return smin > 0.0 ? s.cond_rowgram / smin + 1.0 / (smin * smin)
                      : std::numeric_limits<double>::infinity();
  }
  const auto& br = std::get<data::BayesCmRegularizer>(cfg.regularizer);
  const double r_m = cfg.prior.radius() + 4.0 * cfg.noise.std + 1.0;
  const bayes::BayesModel model =
      data::make_bayes_model(cfg.forward, cfg.prior, br, r_m);
  if (cfg.prior.dimension > 3)
    return std::numeric_limits<double>::infinity();
  return bayes::lipschitz_bound_bayes(model, 2001).proof_bound;
}

inline Report make_report(const PipelineConfig& cfg,
                          const nn::MlpOperator& net,
                          const data::RegularizedDataset& train,
                          const data::RegularizedDataset& test) {
  const analysis::ErrorReport err = analysis::empirical_errors(net, train, test);
  const double identity_residual =
      err.learning_error_hat - (err.approx_error_hat + err.gen_gap_hat);
  if (std::abs(identity_residual) > 1e-12)
    throw InvariantError("error decomposition identity violated: residual " +
                         format_double(identity_residual));

  double r_m = 0.0;
  for (const Vec& m : train.inputs) r_m = std::max(r_m, norm2(m));
  for (const Vec& m : test.inputs) r_m = std::max(r_m, norm2(m));
  const double r_a = cfg.prior.radius();
  const double r_f = net.output_clamp;
  const double m_f_measured = nn::frobenius_profile(net).max_norm;
  const double m_f = cfg.frobenius_cap > 0.0 ? cfg.frobenius_cap : m_f_measured;
  const double d_m = static_cast<double>(train.d_m);
  const double d_a = static_cast<double>(train.d_a);
  const double p = static_cast<double>(cfg.net_width);
  const double l = static_cast<double>(cfg.net_depth);
  const double n = static_cast<double>(train.size());

  const double lf_emp = analysis::lipschitz_from_pairs(train.inputs, train.targets);
  const double lf_cert = certified_lipschitz(cfg);

  const double bound_approx =
      analysis::bound_approximation(d_m, d_a, lf_emp, r_m, p, l);
  const double bound_approx_cert =
      analysis::bound_approximation(d_m, d_a, lf_cert, r_m, p, l);
  const double bound_gen =
      analysis::bound_generalization(d_a, r_a, r_f, r_m, l, m_f, n);
  const double bound_learning =
      d_m >= 2.0 ? analysis::bound_learning(d_m, d_a, lf_emp, r_m, m_f,
                                            cfg.p_tilde, cfg.l_tilde, n, cfg.c,
                                            cfg.c_tilde)
                 : std::numeric_limits<double>::quiet_NaN();

  Report report;
  report.emplace_back("experiment", cfg.experiment);
  report.emplace_back("config_hash", config_hash(cfg.raw));
  report.emplace_back("seed", std::to_string(cfg.seed));
  auto num = [&](const std::string& k, double v) {
    report.emplace_back(k, format_double(v));
  };
  num("approx_error_hat", err.approx_error_hat);
  num("gen_gap_hat", err.gen_gap_hat);
  num("learning_error_hat", err.learning_error_hat);
  num("identity_residual", identity_residual);
  num("bound_approx", bound_approx);
  num("bound_approx_certified", bound_approx_cert);
  num("bound_gen", bound_gen);
  num("bound_learning", bound_learning);
  num("lf_empirical", lf_emp);
  num("lf_certified", lf_cert);
  num("d_m", d_m);
  num("d_a", d_a);
  num("r_m", r_m);
  num("r_a", r_a);
  num("r_f", r_f);
  num("m_f_measured", m_f_measured);
  num("m_f_effective", m_f);
  num("width", p);
  num("depth", l);
  num("n_train", n);
  num("n_test", static_cast<double>(test.size()));
  num("p_tilde", cfg.p_tilde);
  num("l_tilde", cfg.l_tilde);
  num("c", cfg.c);
  num("c_tilde", cfg.c_tilde);
  return report;
}

// One sweep cell: fresh data, fresh network, fixed architecture.
struct SweepCell {
  std::size_t n = 0;
  std::size_t seed_index = 0;
  double approx_error_hat = 0.0;
  double gen_gap_hat = 0.0;
  double learning_error_hat = 0.0;
  double bound_gen = 0.0;
};

inline SweepCell run_sweep_cell(const PipelineConfig& cfg, std::size_t n,
                                std::size_t seed_index, std::size_t jobs) {
  PipelineConfig cell = cfg;
  cell.train_n = n;
  cell.test_n = n;
  const std::uint64_t cell_seed = rng::derive_key(
      rng::derive_key(cfg.seed, stage_seed::kSweep + n), seed_index);
  cell.seed = cell_seed;
  const data::RegularizedDataset train = build_dataset(
      cell, n, rng::derive_key(cell_seed, stage_seed::kTrainData), jobs);
  const data::RegularizedDataset test = build_dataset(
      cell, n, rng::derive_key(cell_seed, stage_seed::kTestData), jobs);
  const TrainOutcome out = run_train_on(
      cell, train, rng::derive_key(cell_seed, stage_seed::kNetInit),
      rng::derive_key(cell_seed, stage_seed::kShuffle));
  const analysis::ErrorReport err = analysis::empirical_errors(out.net, train, test);

  double r_m = 0.0;
  for (const Vec& m : train.inputs) r_m = std::max(r_m, norm2(m));
  const double m_f = cfg.frobenius_cap > 0.0
                         ? cfg.frobenius_cap
                         : nn::frobenius_profile(out.net).max_norm;
  SweepCell result;
  result.n = n;
  result.seed_index = seed_index;
  result.approx_error_hat = err.approx_error_hat;
  result.gen_gap_hat = err.gen_gap_hat;
  result.learning_error_hat = err.learning_error_hat;
  result.bound_gen = analysis::bound_generalization(
      static_cast<double>(train.d_a), cfg.prior.radius(), out.net.output_clamp,
      r_m, static_cast<double>(cfg.net_depth), m_f, static_cast<double>(n));
  return result;
}

// Cells are independent experiments, so the worker cap parallelizes across
// cells; per-pair parallelism inside a cell is then left at one.
inline std::vector<SweepCell> run_sweep(const PipelineConfig& cfg,
                                        std::size_t jobs) {
  std::vector<SweepCell> cells;
  if (!cfg.sweep) return cells;
  std::vector<std::pair<std::size_t, std::size_t>> grid;
  for (std::size_t n : cfg.sweep->train_sizes)
    for (std::size_t s = 0; s < cfg.sweep->seeds; ++s) grid.emplace_back(n, s);
  cells.resize(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    cells[i] = run_sweep_cell(cfg, grid[i].first, grid[i].second, 1);
  });
  return cells;
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string csv =
      "n,seed_index,approx_error_hat,gen_gap_hat,learning_error_hat,bound_gen\n";
  for (const SweepCell& c : cells) {
    csv += std::to_string(c.n) + "," + std::to_string(c.seed_index) + "," +
           format_double(c.approx_error_hat) + "," +
           format_double(c.gen_gap_hat) + "," +
           format_double(c.learning_error_hat) + "," +
           format_double(c.bound_gen) + "\n";
  }
  return csv;
}

inline void run_eval(const PipelineConfig& cfg, const Paths& paths,
                     const std::string& checkpoint_path,
                     const std::string& train_path, const std::string& test_path,
                     std::size_t jobs) {
  const std::string hash = config_hash(cfg.raw);
  std::string ck_hash;
  std::uint64_t ck_seed = 0;
  const nn::MlpOperator net = load_checkpoint(checkpoint_path, &ck_hash, &ck_seed);
  const data::RegularizedDataset train = data::load(train_path);
  const data::RegularizedDataset test = data::load(test_path);
  const std::vector<std::pair<std::string, std::string>> provenance = {
      {"checkpoint", ck_hash},
      {"train dataset", train.meta.value("config_hash", "")},
      {"test dataset", test.meta.value("config_hash", "")}};
  for (const auto& [what, got] : provenance) {
    if (got != hash)
      throw ConfigError("eval: " + what +
                        " has mismatched config hash (mixed provenance)");
  }
  if (ck_seed != cfg.seed)
    throw ConfigError("eval: checkpoint seed does not match config seed");

  const Report report = make_report(cfg, net, train, test);
  std::filesystem::create_directories(paths.out);
  std::ofstream out(paths.report(), std::ios::binary);
  if (!out) throw ConfigError("cannot write " + paths.report().string());
  out << serialize_report(report);
  out.close();

  if (cfg.sweep) {
    const std::vector<SweepCell> cells = run_sweep(cfg, jobs);
    std::ofstream sw(paths.sweep(), std::ios::binary);
    if (!sw) throw ConfigError("cannot write " + paths.sweep().string());
    sw << sweep_csv(cells);
  }
}

}  // namespace darol::cli
