#ifndef CHOLQR_BASELINES_HPP_
#define CHOLQR_BASELINES_HPP_

#include "cholqr/factor_core.hpp"
#include "cholqr/objective.hpp"
#include "cholqr/random.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cholqr {

enum class SelectorKind { CholQR, Random, GreedySubset, EntropyGreedy };

inline std::string to_string(SelectorKind k) {
  switch (k) {
  case SelectorKind::CholQR:
    return "cholqr";
  case SelectorKind::Random:
    return "random";
  case SelectorKind::GreedySubset:
    return "greedy";
  case SelectorKind::EntropyGreedy:
    return "entropy";
  }
  return "unknown";
}

inline SelectorKind parse_selector(const std::string &s) {
  if (s == "cholqr") {
    return SelectorKind::CholQR;
  }
  if (s == "random") {
    return SelectorKind::Random;
  }
  if (s == "greedy" || s == "titsias") {
    return SelectorKind::GreedySubset;
  }
  if (s == "entropy" || s == "ivm") {
    return SelectorKind::EntropyGreedy;
  }
  throw ConfigError("unknown selector '" + s +
                    "' (expected cholqr|random|greedy|entropy)");
}

struct Selection {
  std::vector<Index> indices;
  /// Candidates dropped because their residual variance vanished.
  Index degenerate = 0;
};

inline Selection select_random(Index n, Index m, Rng &rng) {
  if (m > n || m < 0) {
    throw ConfigError("select_random: m=" + std::to_string(m) +
                      " outside [0, n=" + std::to_string(n) + "]");
  }
  return {sample_without_replacement(n, m, rng), 0};
}

/// Forward selection that draws c random unselected candidates per step and
/// keeps the one with the largest exact objective decrease.
inline Selection select_greedy_subset(const KernelMatrix &K, double sigma2,
                                      const Vector &y, Index m, Index c,
                                      Flavor flavor, Rng &rng) {
  const Index n = K.size();
  if (c < 1) {
    throw ConfigError("select_greedy_subset: candidate count must be >= 1");
  }
  if (m > n) {
    throw ConfigError("select_greedy_subset: m exceeds n");
  }
  FactoredModel model = FactoredModel::build(K, sigma2, y, {}, m).model;
  Selection out;
  std::vector<char> dead(static_cast<std::size_t>(n), 0);
  while (model.k() < m) {
    std::vector<Index> pool;
    for (Index j = 0; j < n; ++j) {
      if (!dead[static_cast<std::size_t>(j)] && !model.contains(j)) {
        pool.push_back(j);
      }
    }
    if (pool.empty()) {
      break;
    }
    const Index take = std::min<Index>(c, static_cast<Index>(pool.size()));
    std::vector<Index> draws =
        sample_without_replacement(static_cast<Index>(pool.size()), take, rng);
    Index best = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    std::optional<Vector> best_ell;
    for (Index pos : draws) {
      const Index j = pool[static_cast<std::size_t>(pos)];
      auto ell = model.residual_column(K, j);
      const auto delta = ell ? exact_delta(model, *ell, flavor) : std::nullopt;
      if (!delta) {
        dead[static_cast<std::size_t>(j)] = 1;
        ++out.degenerate;
        continue;
      }
      if (delta->total() > best_gain ||
          (delta->total() == best_gain && j < best)) {
        best = j;
        best_gain = delta->total();
        best_ell = std::move(ell);
      }
    }
    if (best < 0) {
      continue;
    }
    if (!model.append_pivot(best, *best_ell)) {
      dead[static_cast<std::size_t>(best)] = 1;
      ++out.degenerate;
    }
  }
  out.indices = model.inducing();
  return out;
}

/// Repeatedly picks the point with the largest unexplained variance
/// diag(K - K_hat). A simplified stand-in for IVM-style entropy selection.
inline Selection select_entropy_greedy(const KernelMatrix &K, double sigma2,
                                       const Vector &y, Index m) {
  const Index n = K.size();
  if (m > n) {
    throw ConfigError("select_entropy_greedy: m exceeds n");
  }
  FactoredModel model = FactoredModel::build(K, sigma2, y, {}, m).model;
  Selection out;
  std::vector<char> dead(static_cast<std::size_t>(n), 0);
  while (model.k() < m) {
    Index best = -1;
    double best_d = 0.0;
    const Vector &d = model.residual_diag();
    for (Index j = 0; j < n; ++j) {
      if (dead[static_cast<std::size_t>(j)] || model.contains(j)) {
        continue;
      }
      if (d[j] > best_d) {
        best = j;
        best_d = d[j];
      }
    }
    if (best < 0 || !(best_d > model.pivot_tol())) {
      break;
    }
    auto ell = model.residual_column(K, best);
    if (!ell || !model.append_pivot(best, *ell)) {
      dead[static_cast<std::size_t>(best)] = 1;
      ++out.degenerate;
    }
  }
  out.indices = model.inducing();
  return out;
}

} // namespace cholqr

#endif // CHOLQR_BASELINES_HPP_
