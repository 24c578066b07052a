#ifndef CHOLQR_SWAP_SELECT_HPP_
#define CHOLQR_SWAP_SELECT_HPP_

#include "cholqr/info_pivots.hpp"
#include "cholqr/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace cholqr {

struct SwapConfig {
  /// Number of top approximate candidates evaluated exactly.
  Index shortlist = 1;
  /// A swap is accepted only if it lowers F by more than rel_tol (1 + |F|).
  double acceptance_rel_tol = 1e-9;
};

struct SwapOutcome {
  Index removed = -1;
  Index proposed = -1;
  bool accepted = false;
  double dF_exact = 0.0;
  double F_before = 0.0;
  double F_after = 0.0;
  std::string reason;
};

namespace detail {

/// Indices of the `count` largest finite scores, ties by lowest index.
inline std::vector<Index> top_candidates(const Vector &scores, Index count) {
  std::vector<Index> order;
  for (Index j = 0; j < scores.size(); ++j) {
    if (std::isfinite(scores[j])) {
      order.push_back(j);
    }
  }
  const auto take = std::min<std::size_t>(order.size(),
                                          static_cast<std::size_t>(count));
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(take),
                    order.end(), [&](Index a, Index b) {
                      if (scores[a] != scores[b]) {
                        return scores[a] > scores[b];
                      }
                      return a < b;
                    });
  order.resize(take);
  return order;
}

} // namespace detail

/// Tries to replace inducing point i:
///  (I) permute i to the end and downdate, (II) read F on the reduced model,
///  (III) propose the best approximate candidate (i included), (IV) score it
///  exactly, (V) keep it only if the objective strictly improves, otherwise
///  re-append i's saved column, (VI) refresh the information pivots.
inline SwapOutcome swap_once(FactoredModel &model, InfoPivotSet &ips, Index i,
                             const KernelMatrix &K, Flavor flavor, Rng &rng,
                             const SwapConfig &cfg = {}) {
  SwapOutcome out;
  out.removed = i;
  out.proposed = i;
  const double F_full = energy(model, flavor).value();
  out.F_before = F_full;
  out.F_after = F_full;
  const double tol = cfg.acceptance_rel_tol * (1.0 + std::abs(F_full));

  model.permute_to_end(i);
  const Vector saved = model.downdate();
  const double F_reduced = energy(model, flavor).value();

  auto restore = [&](std::string reason) {
    if (!model.append_pivot(i, saved)) {
      throw NumericalError("swap_once: could not restore removed pivot " +
                           std::to_string(i));
    }
    out.accepted = false;
    out.F_after = energy(model, flavor).value();
    out.reason = std::move(reason);
    return out;
  };

  const InfoPivotSet scoring = with_leading_pivot(ips, i, saved, model);
  const Vector scores = approx_delta_all(model, scoring, flavor);
  const auto shortlist =
      detail::top_candidates(scores, std::max<Index>(cfg.shortlist, 1));
  if (shortlist.empty()) {
    return restore("no admissible candidate");
  }

  // The removed point's exact gain is known without any kernel work.
  Index best = i;
  double best_gain = F_reduced - F_full;
  std::optional<Vector> best_ell;
  for (Index j : shortlist) {
    if (j == i) {
      continue;
    }
    auto ell = model.residual_column(K, j);
    if (!ell) {
      continue;
    }
    const auto delta = exact_delta(model, *ell, flavor);
    if (!delta) {
      continue;
    }
    if (delta->total() > best_gain ||
        (delta->total() == best_gain && j < best)) {
      best = j;
      best_gain = delta->total();
      best_ell = std::move(ell);
    }
  }
  out.proposed = shortlist.front();
  if (best == i) {
    out.dF_exact = 0.0;
    return restore(shortlist.front() == i ? "removed point proposed"
                                          : "no improvement");
  }
  out.proposed = best;
  const double F_candidate = F_reduced - best_gain;
  out.dF_exact = F_full - F_candidate;
  if (!(F_candidate < F_full - tol)) {
    return restore("no improvement");
  }
  if (!model.append_pivot(best, *best_ell)) {
    return restore("candidate numerically dependent");
  }
  out.accepted = true;
  out.F_after = energy(model, flavor).value();
  update_on_swap(ips, model, i, best, K, rng);
  return out;
}

struct PhaseStats {
  Index attempts = 0;
  Index accepted = 0;
  double F_start = 0.0;
  double F_end = 0.0;
  std::vector<SwapOutcome> outcomes;

  double acceptance_rate() const {
    return attempts > 0 ? static_cast<double>(accepted) /
                              static_cast<double>(attempts)
                        : 0.0;
  }
};

/// `budget` swap attempts; victims are drawn without replacement from the
/// inducing set as it stood at the start of each sweep.
inline PhaseStats discrete_phase(FactoredModel &model, InfoPivotSet &ips,
                                 Index budget, const KernelMatrix &K,
                                 Flavor flavor, Rng &rng,
                                 const SwapConfig &cfg = {}) {
  PhaseStats stats;
  stats.F_start = energy(model, flavor).value();
  stats.F_end = stats.F_start;
  if (model.k() == 0) {
    return stats;
  }
  std::vector<Index> victims;
  while (stats.attempts < budget) {
    if (victims.empty()) {
      victims = model.inducing();
      shuffle_in_place(victims, rng);
    }
    const Index i = victims.back();
    victims.pop_back();
    if (!model.contains(i)) {
      continue;
    }
    if (!ips.synced_with(model) && ips.model_id != model.id()) {
      ips = build_info_pivots(model, K, ips.requested, rng);
    }
    SwapOutcome outcome = swap_once(model, ips, i, K, flavor, rng, cfg);
    ++stats.attempts;
    if (outcome.accepted) {
      ++stats.accepted;
    }
    stats.F_end = outcome.F_after;
    stats.outcomes.push_back(std::move(outcome));
  }
  return stats;
}

} // namespace cholqr

#endif // CHOLQR_SWAP_SELECT_HPP_
