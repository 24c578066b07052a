#ifndef CHOLQR_TRAINER_HPP_
#define CHOLQR_TRAINER_HPP_

#include "cholqr/baselines.hpp"
#include "cholqr/factor_core.hpp"
#include "cholqr/hyper_opt.hpp"
#include "cholqr/info_pivots.hpp"
#include "cholqr/objective.hpp"
#include "cholqr/predictor.hpp"
#include "cholqr/swap_select.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cholqr {

/// QR drift above which the factors are rebuilt from scratch.
inline constexpr double kRebuildResidual = 1e-6;

struct TrainConfig {
  Index m = 16;
  Index z = kDefaultInfoPivots;
  Flavor flavor = Flavor::VAR;
  SelectorKind selector = SelectorKind::CholQR;
  /// Candidates per step for the greedy-subset selector.
  Index greedy_candidates = 16;
  /// 0 selects min(60, m).
  Index swaps_per_epoch = 0;
  CGConfig cg;
  SwapConfig swap;
  Index max_epochs = 50;
  double rel_tol = 1e-4;
  std::optional<double> time_budget_seconds;
  std::uint64_t seed = 0;
  /// Run the hyperparameter phase before the discrete phase in each epoch.
  bool continuous_first = false;
  /// Overrides the random initial inducing set.
  std::optional<std::vector<Index>> initial_inducing;
  /// Overrides the scale-aware default hyperparameters.
  std::optional<Hyperparameters> initial_theta;

  Index swaps() const {
    return swaps_per_epoch > 0 ? swaps_per_epoch : std::min<Index>(60, m);
  }

  void validate(Index n) const {
    if (m < 1) {
      throw ConfigError("m: must be at least 1");
    }
    if (m > n) {
      throw ConfigError("m: " + std::to_string(m) + " exceeds training size " +
                        std::to_string(n));
    }
    if (z < 0) {
      throw ConfigError("z: must be non-negative");
    }
    if (greedy_candidates < 1) {
      throw ConfigError("greedy_candidates: must be at least 1");
    }
    if (max_epochs < 0) {
      throw ConfigError("max_epochs: must be non-negative");
    }
  }
};

struct EpochRecord {
  Index epoch = 0;
  EnergyTerms terms;
  Index swap_attempts = 0;
  Index swaps_accepted = 0;
  Index cg_fevals = 0;
  double discrete_ms = 0.0;
  double continuous_ms = 0.0;

  double F() const { return terms.value(); }
};

struct TrainedModel {
  Hyperparameters theta;
  Flavor flavor = Flavor::VAR;
  SelectorKind selector = SelectorKind::CholQR;
  FactoredModel factors;
  std::vector<EpochRecord> trace;
  std::vector<std::string> warnings;

  const std::vector<Index> &inducing() const { return factors.inducing(); }
  EnergyTerms energy() const { return cholqr::energy(factors, flavor); }
};

inline Hyperparameters default_hyperparameters(const Kernel &kernel,
                                               const Dataset &data) {
  Hyperparameters theta;
  theta.log_noise_var =
      std::log(0.1 * detail::population_variance(data.targets));
  theta.kernel_params = kernel.initial_params(data.inputs, data.targets);
  return theta;
}

using EpochCallback =
    std::function<void(const EpochRecord &, const TrainedModel &)>;

namespace detail {

/// Builds factors on I0 and tops up with random admissible points while
/// fewer than m pivots are held. Pivots go missing when they are
/// numerically dependent, which is common for very smooth kernels at
/// initialization; a later theta may make room for them again.
inline FactoredModel build_full(const KernelMatrix &K, double sigma2,
                                const Vector &y, const std::vector<Index> &I0,
                                Index m, Rng &rng,
                                std::vector<std::string> &warnings) {
  auto built = FactoredModel::build(K, sigma2, y, I0, m);
  FactoredModel &model = built.model;
  if (model.k() < m) {
    std::vector<Index> pool;
    for (Index j = 0; j < K.size(); ++j) {
      if (!model.contains(j) &&
          std::find(built.skipped.begin(), built.skipped.end(), j) ==
              built.skipped.end()) {
        pool.push_back(j);
      }
    }
    shuffle_in_place(pool, rng);
    for (Index j : pool) {
      if (model.k() >= m) {
        break;
      }
      if (auto ell = model.residual_column(K, j)) {
        model.append_pivot(j, *ell);
      }
    }
  }
  if (!built.skipped.empty()) {
    warnings.push_back(std::to_string(built.skipped.size()) +
                       " degenerate inducing point(s) dropped");
  }
  if (model.k() < m) {
    warnings.push_back("only " + std::to_string(model.k()) + " of " +
                       std::to_string(m) +
                       " inducing points are numerically independent");
  }
  return std::move(built.model);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

} // namespace detail

/// Alternates discrete inducing-point phases with bounded CG on the
/// hyperparameters until an epoch improves F by less than rel_tol
/// (relative), max_epochs is reached, or the time budget runs out.
/// Returns the lowest-objective state seen.
inline TrainedModel fit(std::shared_ptr<const Kernel> kernel,
                        const Dataset &data, const TrainConfig &cfg,
                        const EpochCallback &on_epoch = {}) {
  data.validate();
  const Index n = data.size();
  if (n == 0) {
    throw ConfigError("fit: empty training set");
  }
  cfg.validate(n);
  const auto start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);

  TrainedModel state;
  state.flavor = cfg.flavor;
  state.selector = cfg.selector;
  state.theta = cfg.initial_theta ? *cfg.initial_theta
                                  : default_hyperparameters(*kernel, data);
  if (!state.theta.finite()) {
    throw ConfigError("initial hyperparameters must be finite");
  }
  KernelMatrix K(kernel, data.inputs, state.theta.kernel_params);
  const Vector &y = data.targets;

  auto select = [&](const KernelMatrix &Kc, double sigma2) {
    switch (cfg.selector) {
    case SelectorKind::GreedySubset:
      return select_greedy_subset(Kc, sigma2, y, cfg.m, cfg.greedy_candidates,
                                  cfg.flavor, rng)
          .indices;
    case SelectorKind::EntropyGreedy:
      return select_entropy_greedy(Kc, sigma2, y, cfg.m).indices;
    default:
      return select_random(n, cfg.m, rng).indices;
    }
  };

  std::vector<Index> I0;
  if (cfg.initial_inducing) {
    I0 = *cfg.initial_inducing;
    if (static_cast<Index>(I0.size()) != cfg.m) {
      throw ConfigError("initial_inducing: expected " + std::to_string(cfg.m) +
                        " indices");
    }
  } else {
    I0 = select(K, state.theta.noise_var());
  }
  std::vector<std::string> init_warnings;
  state.factors = detail::build_full(K, state.theta.noise_var(), y, I0, cfg.m,
                                     rng, init_warnings);
  for (const auto &w : init_warnings) {
    state.warnings.push_back("initial set: " + w);
  }

  EpochRecord initial;
  initial.terms = state.energy();
  state.trace.push_back(initial);
  if (on_epoch) {
    on_epoch(initial, state);
  }

  InfoPivotSet ips;
  if (cfg.selector == SelectorKind::CholQR) {
    ips = build_info_pivots(state.factors, K, cfg.z, rng);
  }

  auto discrete = [&](EpochRecord &rec) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.selector == SelectorKind::CholQR) {
      ips = refresh(ips, state.factors, K, rng);
      const PhaseStats stats = discrete_phase(state.factors, ips, cfg.swaps(),
                                              K, cfg.flavor, rng, cfg.swap);
      rec.swap_attempts = stats.attempts;
      rec.swaps_accepted = stats.accepted;
    } else if (cfg.selector != SelectorKind::Random) {
      // Greedy selectors cannot refine a set; they restart from empty and
      // the new set is kept only if it is no worse.
      std::vector<std::string> scratch;
      FactoredModel candidate =
          detail::build_full(K, state.theta.noise_var(), y,
                             select(K, state.theta.noise_var()), cfg.m, rng,
                             scratch);
      rec.swap_attempts = 1;
      if (energy(candidate, cfg.flavor).value() <
          state.energy().value()) {
        state.factors = std::move(candidate);
        rec.swaps_accepted = 1;
      }
    }
    rec.discrete_ms = detail::elapsed_ms(t0);
  };

  auto continuous = [&](EpochRecord &rec) {
    const auto t0 = std::chrono::steady_clock::now();
    const double F_before = state.energy().value();
    const HyperOptResult res = cg_optimize(K, state.theta, y, state.inducing(),
                                           cfg.flavor, cfg.cg);
    rec.cg_fevals = res.fevals;
    if (res.theta.finite() && res.F < std::numeric_limits<double>::infinity()) {
      try {
        // sigma^2 lives inside the augmented factor, so a theta change
        // means a full rebuild.
        KernelMatrix K_new = K.with_params(res.theta.kernel_params);
        std::vector<std::string> scratch;
        FactoredModel rebuilt =
            detail::build_full(K_new, res.theta.noise_var(), y,
                               state.inducing(), cfg.m, rng, scratch);
        if (energy(rebuilt, cfg.flavor).value() <= F_before) {
          state.theta = res.theta;
          state.factors = std::move(rebuilt);
          K = std::move(K_new);
        }
      } catch (const NumericalError &e) {
        state.warnings.push_back(std::string("hyperparameter step rejected: ") +
                                 e.what());
      }
    }
    if (state.factors.qr_residual() > kRebuildResidual) {
      state.factors = state.factors.rebuilt(K).model;
    }
    rec.continuous_ms = detail::elapsed_ms(t0);
  };

  TrainedModel best = state;
  double F_prev = initial.terms.value();
  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    if (cfg.continuous_first) {
      continuous(rec);
      discrete(rec);
    } else {
      discrete(rec);
      continuous(rec);
    }
    rec.terms = state.energy();
    state.trace.push_back(rec);
    if (on_epoch) {
      on_epoch(rec, state);
    }
    const double F = rec.F();
    if (F <= best.energy().value()) {
      best.theta = state.theta;
      best.factors = state.factors;
    }
    const double improvement = (F_prev - F) / std::max(std::abs(F_prev), 1e-300);
    F_prev = F;
    if (improvement < cfg.rel_tol) {
      break;
    }
    if (cfg.time_budget_seconds &&
        detail::elapsed_ms(start) > 1000.0 * *cfg.time_budget_seconds) {
      state.warnings.push_back("time budget exhausted");
      break;
    }
  }
  best.trace = std::move(state.trace);
  best.warnings = std::move(state.warnings);
  return best;
}

/// Predictor for a trained model over its training data.
inline Predictor make_predictor(const TrainedModel &trained,
                                std::shared_ptr<const Kernel> kernel,
                                const Dataset &train) {
  KernelMatrix K(std::move(kernel), train.inputs,
                 trained.theta.kernel_params);
  return Predictor(K, trained.theta.noise_var(), train.targets,
                   trained.inducing());
}

} // namespace cholqr

#endif // CHOLQR_TRAINER_HPP_
