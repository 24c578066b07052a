// cholqr: train, evaluate and benchmark sparse GP models from the shell.
//
//   cholqr synth --kind sine1d --n 200 --test-n 200 --out data
//   cholqr train --config data/config.json --out run
//   cholqr eval  --model run/model.json --test data/test.csv
//   cholqr bench --config bench.json --out bench
//   cholqr inspect --model run/model.json
//   cholqr inspect --curves bench/bench_curves.csv > curves.dat

#include "cholqr/cholqr.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace cholqr;

struct RunFlags {
  std::string config;
  harness::Overrides o;
};

void add_run_flags(CLI::App *cmd, RunFlags &f) {
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->required();
  cmd->add_option("--seed", f.o.seed, "Override the seed (bench: the seed list)");
  cmd->add_option("--out", f.o.out, "Output directory");
  cmd->add_option("--selector", f.o.selector,
                  "cholqr|random|greedy|entropy (bench: also cholqr-zN, greedy-C)");
  cmd->add_option("--flavor", f.o.flavor, "Objective")
      ->check(CLI::IsMember({"mle", "var"}));
  cmd->add_option("--m", f.o.m, "Number of inducing points");
  cmd->add_option("--z", f.o.z, "Number of information pivots");
}

RunConfig load(const RunFlags &f) {
  RunConfig cfg = load_run_config(f.config);
  harness::apply(cfg, f.o);
  return cfg;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sparse GP regression with swap-based inducing point selection"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto *train = app.add_subcommand("train", "Fit one model and write its report");
  add_run_flags(train, train_flags);

  RunFlags bench_flags;
  auto *bench = app.add_subcommand(
      "bench", "Run every (selector, split, seed) cell of a benchmark");
  add_run_flags(bench, bench_flags);

  harness::EvalRequest eval_req;
  std::string eval_out;
  auto *eval = app.add_subcommand("eval", "Score a saved model on test data");
  eval->add_option("--model", eval_req.model_path, "Model file")->required();
  eval->add_option("--test", eval_req.test_path, "Test dataset CSV")->required();
  eval->add_option("--train", eval_req.train_path,
                   "Training dataset CSV (default: path recorded in the model)");
  eval->add_option("--predictions", eval_req.predictions_path,
                   "Write per-point predictions to this CSV");
  eval->add_option("--out", eval_out, "Write metrics JSON here instead of stdout");

  harness::SynthRequest synth_req;
  std::string synth_out;
  auto *synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--kind", synth_req.kind, "sine1d|smooth8d|histogram")
      ->check(CLI::IsMember({"sine1d", "smooth8d", "histogram"}))
      ->capture_default_str();
  synth->add_option("--n", synth_req.n, "Training points before down-sampling")
      ->capture_default_str();
  synth->add_option("--test-n", synth_req.test_n, "Extra points written to test.csv")
      ->capture_default_str();
  synth->add_option("--every", synth_req.every, "Keep every k-th training point")
      ->capture_default_str();
  synth->add_option("--groups", synth_req.groups, "Histogram channel groups")
      ->capture_default_str();
  synth->add_option("--bins", synth_req.bins_per_group, "Histogram bins per group")
      ->capture_default_str();
  synth->add_option("--seed", synth_req.seed)->capture_default_str();
  synth->add_option("--out", synth_req.out_dir, "Output directory")
      ->capture_default_str();

  std::string inspect_model;
  std::string inspect_curves;
  auto *inspect = app.add_subcommand(
      "inspect", "Print a model's inducing set and hyperparameters, or "
                 "turn bench curves into gnuplot columns");
  auto *im = inspect->add_option("--model", inspect_model, "Model file");
  auto *ic = inspect->add_option("--curves", inspect_curves, "bench_curves.csv");
  im->excludes(ic);
  inspect->require_option(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return harness::kExitConfig;
  }

  return harness::guarded(
      [&] {
        if (train->parsed()) {
          const RunConfig cfg = load(train_flags);
          const auto outcome = harness::cmd_train(cfg);
          const EnergyTerms t = outcome.model.energy();
          std::cout << "trained " << outcome.model.trace.size() - 1
                    << " epoch(s), F = " << t.value() << ", m = "
                    << outcome.model.inducing().size() << "\n";
          if (!outcome.report["final"]["smse"].is_null()) {
            std::cout << "test SMSE " << outcome.report["final"]["smse"]
                      << ", SNLP " << outcome.report["final"]["snlp"] << "\n";
          }
          for (const auto &w : outcome.model.warnings) {
            std::cerr << "warning: " << w << "\n";
          }
          std::cout << "wrote " << cfg.out_dir << "\n";
        } else if (bench->parsed()) {
          const RunConfig cfg = load(bench_flags);
          const auto outcome = harness::cmd_bench(cfg);
          for (const auto &v : outcome.summary["variants"]) {
            std::cout << v["variant"].get<std::string>() << ": " << v["ok"]
                      << "/" << v["runs"] << " ok, mean SMSE " << v["mean_smse"]
                      << ", mean SNLP " << v["mean_snlp"] << "\n";
          }
          for (const auto &f : outcome.summary["failures"]) {
            std::cerr << "cell failed: " << f.dump() << "\n";
          }
          std::cout << "wrote " << cfg.out_dir << "\n";
        } else if (eval->parsed()) {
          const Json metrics = harness::cmd_eval(eval_req);
          if (eval_out.empty()) {
            std::cout << metrics.dump(2) << "\n";
          } else {
            harness::detail::write_text(eval_out, metrics.dump(2) + "\n");
          }
        } else if (synth->parsed()) {
          const Index n = harness::cmd_synth(synth_req);
          std::cout << "wrote " << n << " training rows to " << synth_req.out_dir
                    << "\n";
        } else if (inspect->parsed()) {
          std::cout << (inspect_model.empty()
                            ? harness::gnuplot_curves(inspect_curves)
                            : harness::cmd_inspect(inspect_model));
        }
      },
      std::cerr);
}
