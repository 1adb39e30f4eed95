// Command-line runner for the regularized-data operator-learning pipeline:
//   gen     build the regularized train/test datasets from a config
//   train   fit the stacked ReLU operator network on a dataset
//   eval    produce the error report (and the error-vs-n sweep, if configured)
//   verify  re-run every module's invariant suite
//   report  pretty-print a report file / sweep table
//
// Exit codes: 0 ok, 1 validation error, 2 invariant failure, 3 numerical
// failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "darol/config.hpp"
#include "darol/pipeline.hpp"
#include "darol/verify.hpp"

namespace {

using namespace darol;
using namespace darol::cli;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::size_t jobs = 1;
  long long seed_override = -1;
};

PipelineConfig load(const CommonArgs& args) {
  PipelineConfig cfg = load_config(args.config_path);
  if (args.seed_override >= 0) {
    cfg.seed = static_cast<std::uint64_t>(args.seed_override);
    cfg.raw["seed_override"] = cfg.seed;  // recorded; changes the config hash
  }
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  return cfg;
}

Paths paths_for(const PipelineConfig& cfg) { return Paths{cfg.output_dir}; }

int cmd_gen(const CommonArgs& args) {
  const PipelineConfig cfg = load(args);
  const Paths paths = paths_for(cfg);
  run_gen(cfg, paths, args.jobs);
  const data::RegularizedDataset train = data::load(paths.train_dataset().string());
  std::cout << "wrote " << paths.train_dataset().string() << " ("
            << train.size() << " pairs)\n"
            << "wrote " << paths.test_dataset().string() << "\n";
  const auto& diag = train.meta["regularizer_diagnostics"];
  if (diag.contains("certified_fraction"))
    std::cout << "certified non-degenerate fraction: "
              << diag["certified_fraction"].get<double>() << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& dataset_path) {
  const PipelineConfig cfg = load(args);
  const Paths paths = paths_for(cfg);
  const std::string ds =
      dataset_path.empty() ? paths.train_dataset().string() : dataset_path;
  run_train(cfg, paths, ds);
  std::cout << "wrote " << paths.checkpoint().string() << "\n"
            << "wrote " << paths.history().string() << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& train_ds, const std::string& test_ds) {
  const PipelineConfig cfg = load(args);
  const Paths paths = paths_for(cfg);
  run_eval(cfg, paths,
           checkpoint.empty() ? paths.checkpoint().string() : checkpoint,
           train_ds.empty() ? paths.train_dataset().string() : train_ds,
           test_ds.empty() ? paths.test_dataset().string() : test_ds, args.jobs);
  std::cout << "wrote " << paths.report().string() << "\n";
  if (cfg.sweep) std::cout << "wrote " << paths.sweep().string() << "\n";
  return 0;
}

int cmd_verify(const std::string& inject_fault) {
  const auto results = run_verify(inject_fault);
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
    if (!r.passed) {
      std::cout << " -- " << r.detail;
      ++failed;
    }
    std::cout << "\n";
  }
  std::cout << results.size() - failed << "/" << results.size()
            << " invariant suites passed\n";
  return failed == 0 ? 0 : 2;
}

int cmd_report(const std::string& report_path, const std::string& sweep_path) {
  const Report report = parse_report(io::read_file(report_path));
  std::size_t width = 0;
  for (const auto& [k, v] : report) width = std::max(width, k.size());
  for (const auto& [k, v] : report)
    std::printf("%-*s  %s\n", static_cast<int>(width), k.c_str(), v.c_str());
  if (!sweep_path.empty()) {
    std::cout << "\n" << io::read_file(sweep_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-regularized operator learning pipeline"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string dataset_path, checkpoint_path, train_ds, test_ds;
  std::string inject_fault, report_path, sweep_path;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    sub->add_option("--config", common.config_path, "pipeline config (JSON)")
        ->required(needs_config);
    sub->add_option("--out", common.out_dir, "output directory override");
    sub->add_option("--jobs", common.jobs, "worker cap (results are identical)");
    sub->add_option("--seed-override", common.seed_override,
                    "replace the master seed (recorded in metadata)");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate regularized datasets");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "train the operator network");
  add_common(train);
  train->add_option("--dataset", dataset_path, "training dataset path");

  CLI::App* eval = app.add_subcommand("eval", "evaluate errors and bounds");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint path");
  eval->add_option("--train-dataset", train_ds, "train dataset path");
  eval->add_option("--test-dataset", test_ds, "test dataset path");

  CLI::App* verify = app.add_subcommand("verify", "run all invariant suites");
  verify->add_option("--inject-fault", inject_fault,
                     "corrupt one named invariant to prove it can fail");

  CLI::App* report = app.add_subcommand("report", "pretty-print a report");
  report->add_option("--report", report_path, "report file")->required();
  report->add_option("--sweep", sweep_path, "sweep CSV to append");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(common);
    if (train->parsed()) return cmd_train(common, dataset_path);
    if (eval->parsed()) return cmd_eval(common, checkpoint_path, train_ds, test_ds);
    if (verify->parsed()) return cmd_verify(inject_fault);
    if (report->parsed()) return cmd_report(report_path, sweep_path);
  } catch (const darol::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const darol::InvariantError& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return 2;
  } catch (const darol::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
