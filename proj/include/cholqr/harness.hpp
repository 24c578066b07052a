#ifndef CHOLQR_HARNESS_HPP_
#define CHOLQR_HARNESS_HPP_

#include "cholqr/config.hpp"
#include "cholqr/model_io.hpp"
#include "cholqr/synth.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

namespace cholqr::harness {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
};

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> selector;
  std::optional<std::string> flavor;
  std::optional<Index> m;
  std::optional<Index> z;
};

inline void apply(RunConfig &cfg, const Overrides &o) {
  if (o.seed) {
    cfg.train.seed = *o.seed;
    if (cfg.bench) {
      cfg.bench->seeds = {*o.seed};
    }
  }
  if (o.out) {
    cfg.out_dir = *o.out;
  }
  if (o.selector) {
    cfg.train.selector = parse_selector(*o.selector);
    if (cfg.bench) {
      cfg.bench->selectors = {*o.selector};
    }
  }
  if (o.flavor) {
    cfg.train.flavor = parse_flavor(*o.flavor);
  }
  if (o.m) {
    if (*o.m < 1) {
      throw ConfigError("--m: must be at least 1");
    }
    cfg.train.m = *o.m;
  }
  if (o.z) {
    if (*o.z < 0) {
      throw ConfigError("--z: must be non-negative");
    }
    cfg.train.z = *o.z;
    if (cfg.bench) {
      cfg.bench->z_values = {*o.z};
    }
  }
}

struct Metrics {
  double smse = 0.0;
  double snlp = 0.0;
  Index n_test = 0;
};

inline Metrics evaluate(const Predictor &pred, const Dataset &train,
                        const Dataset &test) {
  const auto preds = pred.predict_all(test.inputs);
  Metrics m;
  m.n_test = test.size();
  m.smse = smse(preds, test.targets);
  m.snlp = snlp(preds, test.targets, train.targets.mean(),
                cholqr::detail::population_variance(train.targets));
  return m;
}

/// Each epoch's F may exceed the previous one by at most `tol`.
inline bool trace_monotone(const std::vector<EpochRecord> &trace,
                           double tol = 1e-9) {
  for (std::size_t e = 1; e < trace.size(); ++e) {
    if (trace[e].F() > trace[e - 1].F() + tol) {
      return false;
    }
  }
  return true;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

inline void write_text(const std::string &path, const std::string &text) {
  std::ofstream out = io::detail::open_out(path);
  out << text;
  if (!out) {
    throw ConfigError("failed writing '" + path + "'");
  }
}

inline std::string trace_csv(const std::vector<EpochRecord> &trace) {
  std::ostringstream s;
  s << "epoch,F,E_D,E_C,E_V,swap_attempts,swaps_accepted,cg_fevals\n";
  for (const auto &r : trace) {
    s << r.epoch << ',' << fmt(r.F()) << ',' << fmt(r.terms.data) << ','
      << fmt(r.terms.complexity) << ',' << fmt(r.terms.trace) << ','
      << r.swap_attempts << ',' << r.swaps_accepted << ',' << r.cg_fevals
      << '\n';
  }
  return s.str();
}

inline std::string timing_csv(const std::vector<EpochRecord> &trace) {
  std::ostringstream s;
  s << "epoch,discrete_ms,continuous_ms\n" << std::fixed << std::setprecision(3);
  for (const auto &r : trace) {
    s << r.epoch << ',' << r.discrete_ms << ',' << r.continuous_ms << '\n';
  }
  return s.str();
}

inline Json theta_json(const Hyperparameters &theta,
                       const std::vector<std::string> &names) {
  Json j;
  j["log_noise_var"] = theta.log_noise_var;
  for (Index p = 0; p < theta.kernel_params.size(); ++p) {
    j[names[static_cast<std::size_t>(p)]] = theta.kernel_params[p];
  }
  return j;
}

inline Json number_or_null(const std::optional<double> &v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

} // namespace detail

/// The deterministic part of a run: everything except wall time.
inline Json run_report(const Json &config_echo, const TrainedModel &trained,
                       const Kernel &kernel, const Dataset &train,
                       const std::optional<Metrics> &metrics,
                       const std::string &split) {
  Json j;
  j["seed"] = config_echo.value("seed", 0);
  j["config"] = config_echo;
  j["dataset_hash"] = io::dataset_hash(train);
  j["split"] = split;
  j["n_train"] = train.size();
  j["n_test"] = metrics ? metrics->n_test : 0;
  const EnergyTerms final_terms = trained.energy();
  Json fin;
  fin["F"] = final_terms.value();
  fin["E_D"] = final_terms.data;
  fin["E_C"] = final_terms.complexity;
  fin["E_V"] = final_terms.trace;
  fin["smse"] = detail::number_or_null(
      metrics ? std::optional<double>(metrics->smse) : std::nullopt);
  fin["snlp"] = detail::number_or_null(
      metrics ? std::optional<double>(metrics->snlp) : std::nullopt);
  j["final"] = fin;
  j["epochs"] = static_cast<Index>(trained.trace.size()) - 1;
  j["trace_monotone"] = trace_monotone(trained.trace);
  Json tr = Json::array();
  for (const auto &r : trained.trace) {
    tr.push_back({{"epoch", r.epoch},
                  {"F", r.F()},
                  {"E_D", r.terms.data},
                  {"E_C", r.terms.complexity},
                  {"E_V", r.terms.trace},
                  {"swaps_accepted", r.swaps_accepted}});
  }
  j["trace"] = tr;
  j["theta"] = detail::theta_json(trained.theta, kernel.param_names());
  j["inducing"] = trained.inducing();
  j["warnings"] = trained.warnings;
  return j;
}

struct TrainOutcome {
  TrainedModel model;
  Json report;
};

/// Fits one model and writes model.json, report.json, trace.csv and
/// timing.csv into cfg.out_dir.
inline TrainOutcome cmd_train(const RunConfig &cfg) {
  const Dataset train = io::read_dataset(cfg.resolved_train());
  const auto kernel = make_kernel(cfg.kernel, train);
  TrainOutcome out;
  out.model = fit(kernel, train, cfg.train);
  std::optional<Metrics> metrics;
  if (auto test_path = cfg.resolved_test()) {
    const Dataset test = io::read_dataset(*test_path);
    metrics = evaluate(make_predictor(out.model, kernel, train), train, test);
  }
  const Json echo = cfg.to_json();
  out.report = run_report(echo, out.model, *kernel, train, metrics,
                          cfg.test_path ? "fixed" : "none");

  const std::filesystem::path dir(cfg.out_dir);
  KernelSpec spec = cfg.kernel;
  spec.matrices.clear();
  for (const auto &p : cfg.kernel.resolved_matrices) {
    spec.matrices.push_back(std::filesystem::absolute(p).string());
  }
  save_model((dir / "model.json").string(),
             snapshot(out.model, *kernel, spec, train,
                      std::filesystem::absolute(cfg.resolved_train()).string(),
                      echo));
  detail::write_text((dir / "report.json").string(), out.report.dump(2) + "\n");
  detail::write_text((dir / "trace.csv").string(),
                     detail::trace_csv(out.model.trace));
  detail::write_text((dir / "timing.csv").string(),
                     detail::timing_csv(out.model.trace));
  return out;
}

struct EvalRequest {
  std::string model_path;
  std::string test_path;
  /// Defaults to the training path recorded in the model.
  std::optional<std::string> train_path;
  std::optional<std::string> predictions_path;
};

/// Rebuilds the model on its (hash-checked) training data and scores it.
inline Json cmd_eval(const EvalRequest &req) {
  SavedModel saved = load_model(req.model_path);
  const std::string train_path =
      req.train_path ? *req.train_path : saved.train_path;
  if (train_path.empty()) {
    throw ConfigError("eval: model does not record its training data; pass "
                      "--train");
  }
  const Dataset train = io::read_dataset(train_path);
  check_dataset(saved, train);
  const Dataset test = io::read_dataset(req.test_path);
  if (test.dim() != train.dim()) {
    throw ConfigError("eval: test data has " + std::to_string(test.dim()) +
                      " feature column(s), training data has " +
                      std::to_string(train.dim()));
  }
  const auto kernel = make_kernel(saved.kernel, train);
  const TrainedModel model = restore(saved, kernel, train);
  const Predictor pred = make_predictor(model, kernel, train);
  const auto preds = pred.predict_all(test.inputs);
  Metrics m;
  m.n_test = test.size();
  m.smse = smse(preds, test.targets);
  m.snlp = snlp(preds, test.targets, train.targets.mean(),
                cholqr::detail::population_variance(train.targets));
  if (req.predictions_path) {
    std::ostringstream s;
    s << "index,mean,latent_var,obs_var\n";
    for (std::size_t t = 0; t < preds.size(); ++t) {
      s << t << ',' << detail::fmt(preds[t].mean) << ','
        << detail::fmt(preds[t].latent_variance) << ','
        << detail::fmt(preds[t].observation_variance) << '\n';
    }
    detail::write_text(*req.predictions_path, s.str());
  }
  Json j;
  j["dataset_hash"] = saved.dataset_hash;
  j["m"] = static_cast<Index>(saved.inducing.size());
  j["n_test"] = m.n_test;
  j["smse"] = m.smse;
  j["snlp"] = m.snlp;
  return j;
}

// ---------------------------------------------------------------------------
// bench

struct BenchCell {
  std::string label;
  SelectorKind selector = SelectorKind::CholQR;
  Index z = kDefaultInfoPivots;
  Index greedy_candidates = 16;
  Index split = 0;
  std::uint64_t seed = 0;
};

struct CurvePoint {
  Index epoch = 0;
  double seconds = 0.0;
  double F = 0.0;
  double smse = 0.0;
  double snlp = 0.0;
};

struct CellResult {
  std::string status = "ok";
  std::string message;
  std::optional<TrainedModel> model;
  std::optional<Metrics> metrics;
  std::vector<CurvePoint> curve;
  Json report;
};

inline Index parse_suffix(const std::string &label, const std::string &prefix,
                          Index min) {
  const std::string rest = label.substr(prefix.size());
  Index v = -1;
  auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
  if (ec != std::errc() || p != rest.data() + rest.size() || v < min) {
    throw ConfigError("bench.selectors: cannot parse '" + label + "'");
  }
  return v;
}

/// Expands selector labels into concrete variants, in config order.
inline std::vector<BenchCell> expand_variants(const RunConfig &cfg) {
  const BenchConfig &b = *cfg.bench;
  std::vector<BenchCell> out;
  for (const auto &label : b.selectors) {
    BenchCell c;
    c.greedy_candidates = cfg.train.greedy_candidates;
    c.z = cfg.train.z;
    if (label == "cholqr") {
      for (Index z : b.z_values) {
        c.selector = SelectorKind::CholQR;
        c.z = z;
        c.label = "cholqr-z" + std::to_string(z);
        out.push_back(c);
      }
      continue;
    }
    if (label.rfind("cholqr-z", 0) == 0) {
      c.selector = SelectorKind::CholQR;
      c.z = parse_suffix(label, "cholqr-z", 0);
    } else if (label.rfind("greedy-", 0) == 0) {
      c.selector = SelectorKind::GreedySubset;
      c.greedy_candidates = parse_suffix(label, "greedy-", 1);
    } else {
      try {
        c.selector = parse_selector(label);
      } catch (const ConfigError &e) {
        throw ConfigError(std::string("bench.selectors: ") + e.what());
      }
      if (c.selector == SelectorKind::CholQR) {
        c.z = b.z_values.empty() ? cfg.train.z : b.z_values.front();
      }
      if (c.selector == SelectorKind::GreedySubset) {
        c.label = "greedy-" + std::to_string(c.greedy_candidates);
      }
    }
    if (c.label.empty()) {
      c.label = c.selector == SelectorKind::CholQR
                    ? "cholqr-z" + std::to_string(c.z)
                    : label;
    }
    out.push_back(c);
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    for (std::size_t b2 = a + 1; b2 < out.size(); ++b2) {
      if (out[a].label == out[b2].label) {
        throw ConfigError("bench.selectors: variant '" + out[a].label +
                          "' appears twice");
      }
    }
  }
  return out;
}

/// Variants x splits x seeds, in that nesting order.
inline std::vector<BenchCell> bench_cells(const RunConfig &cfg) {
  std::vector<BenchCell> cells;
  for (const BenchCell &v : expand_variants(cfg)) {
    for (Index s = 0; s < cfg.bench->splits; ++s) {
      for (std::uint64_t seed : cfg.bench->seeds) {
        BenchCell c = v;
        c.split = s;
        c.seed = seed;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

inline unsigned worker_count(std::size_t jobs) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("CHOLQR_THREADS")) {
    char *end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("CHOLQR_THREADS: expected a positive integer, got '" +
                        std::string(env) + "'");
    }
    cap = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(
      std::max<std::size_t>(1, std::min<std::size_t>(cap, jobs)));
}

/// Runs job(i) for i in [0, count) on up to worker_count(count) threads.
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t)> &job) {
  const unsigned workers = worker_count(count);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      job(i);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) {
    pool.emplace_back(loop);
  }
  loop();
  for (auto &t : pool) {
    t.join();
  }
}

struct BenchOutcome {
  std::vector<BenchCell> cells;
  std::vector<CellResult> results;
  Json summary;
};

inline CellResult run_cell(const RunConfig &cfg, const BenchCell &cell,
                           std::shared_ptr<const Kernel> kernel,
                           const Dataset &train, const Dataset &test,
                           const std::string &split_mode) {
  CellResult res;
  TrainConfig tc = cfg.train;
  tc.selector = cell.selector;
  tc.z = cell.z;
  tc.greedy_candidates = cell.greedy_candidates;
  tc.seed = cell.seed;
  try {
    double seconds = 0.0;
    auto on_epoch = [&](const EpochRecord &rec, const TrainedModel &state) {
      seconds += (rec.discrete_ms + rec.continuous_ms) / 1000.0;
      CurvePoint p;
      p.epoch = rec.epoch;
      p.seconds = seconds;
      p.F = rec.F();
      const Metrics m =
          evaluate(make_predictor(state, kernel, train), train, test);
      p.smse = m.smse;
      p.snlp = m.snlp;
      res.curve.push_back(p);
    };
    res.model = fit(kernel, train, tc, on_epoch);
    res.metrics = evaluate(make_predictor(*res.model, kernel, train), train, test);
    RunConfig cell_cfg = cfg;
    cell_cfg.train = tc;
    cell_cfg.bench.reset();
    Json echo = cell_cfg.to_json();
    echo["variant"] = cell.label;
    echo["split_index"] = cell.split;
    res.report = run_report(echo, *res.model, *kernel, train, res.metrics,
                            split_mode);
  } catch (const ConfigError &e) {
    res.status = "config_error";
    res.message = e.what();
  } catch (const NumericalError &e) {
    res.status = "numerical_error";
    res.message = e.what();
  } catch (const std::exception &e) {
    res.status = "error";
    res.message = e.what();
  }
  return res;
}

/// Runs every (variant, split, seed) cell, writes one report per cell plus
/// bench_runs.csv, bench_summary.json and bench_curves.csv into
/// cfg.out_dir. Failed cells are recorded and skipped in the means.
inline BenchOutcome cmd_bench(const RunConfig &cfg) {
  if (!cfg.bench) {
    throw ConfigError("bench: config has no 'bench' section");
  }
  const Dataset full = io::read_dataset(cfg.resolved_train());
  const auto kernel = make_kernel(cfg.kernel, full);
  std::vector<synth::Split> splits;
  std::string split_mode;
  if (auto test_path = cfg.resolved_test()) {
    if (cfg.bench->splits != 1) {
      throw ConfigError("bench.splits: a fixed test set allows exactly one "
                        "split");
    }
    splits.push_back({full, io::read_dataset(*test_path)});
    split_mode = "fixed";
  } else {
    const auto n_train = static_cast<Index>(
        std::llround(cfg.bench->train_fraction * static_cast<double>(full.size())));
    if (n_train < 1 || n_train >= full.size() - 1) {
      throw ConfigError("bench.train_fraction: leaves too few points for "
                        "training or testing");
    }
    for (Index s = 0; s < cfg.bench->splits; ++s) {
      Rng rng(cfg.bench->split_seed + static_cast<std::uint64_t>(s));
      splits.push_back(synth::random_split(full, n_train, rng));
    }
    split_mode = "random";
  }

  BenchOutcome out;
  out.cells = bench_cells(cfg);
  out.results.resize(out.cells.size());
  parallel_for(out.cells.size(), [&](std::size_t i) {
    const BenchCell &c = out.cells[i];
    const synth::Split &sp = splits[static_cast<std::size_t>(c.split)];
    out.results[i] = run_cell(cfg, c, kernel, sp.train, sp.test, split_mode);
  });

  const std::filesystem::path dir(cfg.out_dir);
  std::ostringstream runs;
  runs << "variant,split,seed,status,epochs,final_F,smse,snlp,trace_monotone\n";
  std::ostringstream curves;
  curves << "variant,split,seed,epoch,seconds,F,smse,snlp\n";
  std::ostringstream timing;
  timing << "variant,split,seed,train_seconds\n";

  struct Agg {
    Index runs = 0;
    Index ok = 0;
    double smse = 0.0;
    double snlp = 0.0;
    double F = 0.0;
    double epochs = 0.0;
  };
  std::vector<std::string> order;
  std::map<std::string, Agg> agg;
  Json failures = Json::array();
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    const BenchCell &c = out.cells[i];
    const CellResult &r = out.results[i];
    if (!agg.contains(c.label)) {
      order.push_back(c.label);
    }
    Agg &a = agg[c.label];
    ++a.runs;
    const std::string key = c.label + ',' + std::to_string(c.split) + ',' +
                            std::to_string(c.seed);
    if (r.status != "ok") {
      runs << key << ',' << r.status << ",,,,,\n";
      failures.push_back({{"variant", c.label},
                          {"split", c.split},
                          {"seed", c.seed},
                          {"status", r.status},
                          {"message", r.message}});
      continue;
    }
    ++a.ok;
    const double F = r.model->energy().value();
    const auto epochs = static_cast<Index>(r.model->trace.size()) - 1;
    a.smse += r.metrics->smse;
    a.snlp += r.metrics->snlp;
    a.F += F;
    a.epochs += static_cast<double>(epochs);
    runs << key << ",ok," << epochs << ',' << detail::fmt(F) << ','
         << detail::fmt(r.metrics->smse) << ',' << detail::fmt(r.metrics->snlp)
         << ',' << (trace_monotone(r.model->trace) ? "true" : "false") << '\n';
    for (const auto &p : r.curve) {
      curves << key << ',' << p.epoch << ',' << std::fixed
             << std::setprecision(6) << p.seconds << std::defaultfloat << ','
             << detail::fmt(p.F) << ',' << detail::fmt(p.smse) << ','
             << detail::fmt(p.snlp) << '\n';
    }
    timing << key << ',' << std::fixed << std::setprecision(6)
           << (r.curve.empty() ? 0.0 : r.curve.back().seconds)
           << std::defaultfloat << '\n';
    const std::filesystem::path cell_dir =
        dir / "runs" / c.label /
        ("split" + std::to_string(c.split) + "_seed" + std::to_string(c.seed));
    detail::write_text((cell_dir / "report.json").string(),
                       r.report.dump(2) + "\n");
    detail::write_text((cell_dir / "trace.csv").string(),
                       detail::trace_csv(r.model->trace));
    detail::write_text((cell_dir / "timing.csv").string(),
                       detail::timing_csv(r.model->trace));
  }

  Json variants = Json::array();
  for (const auto &label : order) {
    const Agg &a = agg[label];
    const double k = static_cast<double>(std::max<Index>(a.ok, 1));
    Json v;
    v["variant"] = label;
    v["runs"] = a.runs;
    v["ok"] = a.ok;
    v["failed"] = a.runs - a.ok;
    v["mean_smse"] = a.ok ? Json(a.smse / k) : Json(nullptr);
    v["mean_snlp"] = a.ok ? Json(a.snlp / k) : Json(nullptr);
    v["mean_final_F"] = a.ok ? Json(a.F / k) : Json(nullptr);
    v["mean_epochs"] = a.ok ? Json(a.epochs / k) : Json(nullptr);
    variants.push_back(v);
  }
  out.summary["config"] = cfg.to_json();
  out.summary["split"] = split_mode;
  out.summary["cells"] = static_cast<Index>(out.cells.size());
  out.summary["variants"] = variants;
  out.summary["failures"] = failures;

  detail::write_text((dir / "bench_runs.csv").string(), runs.str());
  detail::write_text((dir / "bench_summary.json").string(),
                     out.summary.dump(2) + "\n");
  detail::write_text((dir / "bench_curves.csv").string(), curves.str());
  detail::write_text((dir / "bench_timing.csv").string(), timing.str());
  return out;
}

/// Epoch-wise means of bench_curves.csv, one whitespace-separated block per
/// variant with two blank lines between blocks (gnuplot "index" layout).
inline std::string gnuplot_curves(const std::string &curves_csv) {
  std::ifstream in = io::detail::open_in(curves_csv, std::ios::in);
  std::string line;
  std::getline(in, line);
  if (io::detail::trim(line) != "variant,split,seed,epoch,seconds,F,smse,snlp") {
    throw ConfigError(curves_csv + ": not a bench_curves.csv file");
  }
  struct Sum {
    double n = 0, seconds = 0, F = 0, smse = 0, snlp = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, std::map<Index, Sum>> sums;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::detail::trim(line).empty()) {
      continue;
    }
    const auto f = io::detail::split_commas(line);
    double v[5];
    bool ok = f.size() == 8;
    for (int k = 0; ok && k < 5; ++k) {
      ok = io::detail::parse_double(f[static_cast<std::size_t>(3 + k)], v[k]);
    }
    if (!ok) {
      throw ConfigError(curves_csv + ":" + std::to_string(lineno) +
                        ": malformed row");
    }
    if (!sums.contains(f[0])) {
      order.push_back(f[0]);
    }
    Sum &s = sums[f[0]][static_cast<Index>(v[0])];
    s.n += 1;
    s.seconds += v[1];
    s.F += v[2];
    s.smse += v[3];
    s.snlp += v[4];
  }
  std::ostringstream out;
  out << std::setprecision(8);
  for (std::size_t b = 0; b < order.size(); ++b) {
    if (b > 0) {
      out << "\n\n";
    }
    out << "# " << order[b] << "\n# epoch seconds F smse snlp runs\n";
    for (const auto &[epoch, s] : sums[order[b]]) {
      out << epoch << ' ' << s.seconds / s.n << ' ' << s.F / s.n << ' '
          << s.smse / s.n << ' ' << s.snlp / s.n << ' ' << s.n << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// synth, inspect

struct SynthRequest {
  std::string kind = "sine1d";
  Index n = 200;
  std::uint64_t seed = 0;
  std::string out_dir = "data";
  /// Keep every k-th training point (1 keeps all).
  Index every = 1;
  Index test_n = 0;
  Index groups = 4;
  Index bins_per_group = 8;
};

/// Writes train.csv, optionally test.csv, and a starter config.json.
/// Returns the number of training rows written.
inline Index cmd_synth(const SynthRequest &req) {
  if (req.n < 1 || req.test_n < 0 || req.every < 1) {
    throw ConfigError("synth: n and every must be positive, test-n "
                      "non-negative");
  }
  const Index total = req.n + req.test_n;
  Dataset all;
  Json kernel;
  if (req.kind == "sine1d") {
    all = synth::sine_1d(total, req.seed);
    kernel["type"] = "rbf_ard";
  } else if (req.kind == "smooth8d") {
    all = synth::smooth_8d(total, req.seed);
    kernel["type"] = "rbf_ard";
  } else if (req.kind == "histogram") {
    if (req.groups < 1 || req.bins_per_group < 1) {
      throw ConfigError("synth: groups and bins must be positive");
    }
    all = synth::histograms(total, req.groups, req.bins_per_group, req.seed);
    kernel["type"] = "histogram_intersection";
    Json g = Json::array();
    for (const auto &c : synth::histogram_groups(req.groups, req.bins_per_group)) {
      g.push_back({c.begin, c.end});
    }
    kernel["groups"] = g;
  } else {
    throw ConfigError("synth: unknown kind '" + req.kind +
                      "' (expected sine1d|smooth8d|histogram)");
  }
  std::vector<Index> train_rows(static_cast<std::size_t>(req.n));
  std::iota(train_rows.begin(), train_rows.end(), Index{0});
  Dataset train = synth::every_kth(all.subset(train_rows), req.every);
  const std::filesystem::path dir(req.out_dir);
  io::write_dataset((dir / "train.csv").string(), train);
  Json cfg;
  cfg["train"] = "train.csv";
  if (req.test_n > 0) {
    std::vector<Index> test_rows(static_cast<std::size_t>(req.test_n));
    std::iota(test_rows.begin(), test_rows.end(), req.n);
    io::write_dataset((dir / "test.csv").string(), all.subset(test_rows));
    cfg["test"] = "test.csv";
  }
  cfg["kernel"] = kernel;
  cfg["selector"] = "cholqr";
  cfg["flavor"] = "var";
  cfg["m"] = std::min<Index>(16, train.size());
  cfg["z"] = kDefaultInfoPivots;
  cfg["seed"] = req.seed;
  cfg["out"] = "run";
  detail::write_text((dir / "config.json").string(), cfg.dump(2) + "\n");
  return train.size();
}

inline std::string cmd_inspect(const std::string &model_path) {
  const SavedModel s = load_model(model_path);
  std::ostringstream out;
  out << std::setprecision(10);
  out << "model        " << model_path << "\n"
      << "version      " << s.version << "\n"
      << "dataset      " << s.dataset_hash << " (n=" << s.n_train << ")\n"
      << "kernel       " << s.kernel.type << "\n"
      << "flavor       " << to_string(s.flavor) << "\n"
      << "selector     " << to_string(s.selector) << "\n"
      << "theta\n"
      << "  log_noise_var  " << s.theta.log_noise_var << "\n";
  for (Index p = 0; p < s.theta.kernel_params.size(); ++p) {
    const auto name = static_cast<std::size_t>(p) < s.param_names.size()
                          ? s.param_names[static_cast<std::size_t>(p)]
                          : "param" + std::to_string(p);
    out << "  " << name << "  " << s.theta.kernel_params[p] << "\n";
  }
  out << "inducing     (m=" << s.inducing.size() << ")";
  for (Index i : s.inducing) {
    out << ' ' << i;
  }
  out << "\n";
  return out.str();
}

/// Maps the library's exception types onto exit codes, printing the
/// message to `err`.
inline int guarded(const std::function<void()> &body, std::ostream &err) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError &e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError &e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error &e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

} // namespace cholqr::harness

#endif // CHOLQR_HARNESS_HPP_
