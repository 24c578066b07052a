#ifndef CHOLQR_INFO_PIVOTS_HPP_
#define CHOLQR_INFO_PIVOTS_HPP_

#include "cholqr/factor_core.hpp"
#include "cholqr/objective.hpp"
#include "cholqr/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cholqr {

inline constexpr Index kDefaultInfoPivots = 16;

/// Rank-z partial Cholesky factor L_z of the residual K - L L^T, with
/// pivots drawn from outside the inducing set, plus the products used to
/// score every candidate at once:
///   gram = L_z^T L_z,  y_proj = L_z^T y,  q_proj = Q[1:n,:]^T L_z.
///
/// q_proj depends on the model's Q and is stamped with the model id and
/// generation it was computed against.
struct InfoPivotSet {
  std::vector<Index> pivots;
  Matrix factor;
  Matrix gram;
  Vector y_proj;
  Matrix q_proj;
  Index requested = 0;
  std::uint64_t model_id = 0;
  std::uint64_t model_generation = 0;

  Index z() const { return static_cast<Index>(pivots.size()); }

  bool synced_with(const FactoredModel &model) const {
    return model_id == model.id() && model_generation == model.generation();
  }

  bool contains(Index j) const {
    return std::find(pivots.begin(), pivots.end(), j) != pivots.end();
  }
};

inline void sync_projections(InfoPivotSet &ips, const FactoredModel &model) {
  if (model.k() > 0 && ips.z() > 0) {
    ips.q_proj = model.Q_top().transpose() * ips.factor;
  } else {
    ips.q_proj = Matrix::Zero(model.k(), ips.z());
  }
  ips.model_id = model.id();
  ips.model_generation = model.generation();
}

namespace detail {

/// Partial Cholesky of K - L L^T: tries `preferred` in order, then fresh
/// admissible points in random order, until z pivots are accepted.
inline InfoPivotSet factorize_residual(const FactoredModel &model,
                                       const KernelMatrix &K,
                                       const std::vector<Index> &preferred,
                                       Index z, Rng &rng) {
  const Index n = model.n();
  const double tol = model.pivot_tol();
  InfoPivotSet ips;
  ips.requested = z;
  ips.factor = Matrix::Zero(n, std::max<Index>(z, 0));
  Vector resid = model.residual_diag();

  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (Index i : model.inducing()) {
    used[static_cast<std::size_t>(i)] = 1;
  }

  auto try_pivot = [&](Index p) {
    if (used[static_cast<std::size_t>(p)] || !(resid[p] > tol)) {
      return false;
    }
    used[static_cast<std::size_t>(p)] = 1;
    const Index col = ips.z();
    Vector ell = K.column(p);
    if (model.k() > 0) {
      ell.noalias() -= model.L() * model.L().row(p).transpose();
    }
    if (col > 0) {
      ell.noalias() -=
          ips.factor.leftCols(col) * ips.factor.leftCols(col).row(p).transpose();
    }
    const double root = std::sqrt(resid[p]);
    ell /= root;
    ell[p] = root;
    ips.factor.col(col) = ell;
    resid.array() -= ell.array().square();
    resid[p] = 0.0;
    ips.pivots.push_back(p);
    return true;
  };

  for (Index p : preferred) {
    if (ips.z() >= z) {
      break;
    }
    try_pivot(p);
  }
  if (ips.z() < z) {
    std::vector<Index> fresh;
    for (Index j = 0; j < n; ++j) {
      if (!used[static_cast<std::size_t>(j)] && resid[j] > tol) {
        fresh.push_back(j);
      }
    }
    shuffle_in_place(fresh, rng);
    for (Index p : fresh) {
      if (ips.z() >= z) {
        break;
      }
      try_pivot(p);
    }
  }
  ips.factor.conservativeResize(n, ips.z());
  ips.gram = ips.factor.transpose() * ips.factor;
  ips.y_proj = ips.factor.transpose() * model.y();
  sync_projections(ips, model);
  return ips;
}

} // namespace detail

/// z pivots sampled uniformly from admissible non-inducing points. When
/// fewer than z are admissible the set shrinks; `requested` keeps z.
inline InfoPivotSet build_info_pivots(const FactoredModel &model,
                                      const KernelMatrix &K, Index z,
                                      Rng &rng) {
  if (z < 0) {
    throw ConfigError("information pivots: z must be non-negative");
  }
  return detail::factorize_residual(model, K, {}, z, rng);
}

/// Full resample and rebuild.
inline InfoPivotSet refresh(const InfoPivotSet &ips, const FactoredModel &model,
                            const KernelMatrix &K, Rng &rng) {
  return build_info_pivots(model, K, ips.requested, rng);
}

/// Approximate decrease F(I) - F(I + j) for every j, using
/// K - L L^T ~= L_z L_z^T. Inducing and unrepresented candidates score -inf.
/// With no pivots every admissible candidate scores 0.
inline Vector approx_delta_all(const FactoredModel &model,
                               const InfoPivotSet &ips, Flavor flavor) {
  if (!ips.synced_with(model)) {
    throw std::logic_error(
        "approx_delta_all: information pivot caches are stale for this model");
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const Index n = model.n();
  const double s2 = model.sigma2();
  Vector scores(n);

  if (ips.z() == 0) {
    scores.setZero();
    for (Index i : model.inducing()) {
      scores[i] = kNegInf;
    }
    return scores;
  }

  const Matrix &A = ips.factor;
  const Vector dt = A.rowwise().squaredNorm();
  const Vector ell2 = (A * ips.gram).cwiseProduct(A).rowwise().sum();
  const Vector yl = A * ips.y_proj;
  Vector cql = Vector::Zero(n);
  Vector qn2 = Vector::Zero(n);
  if (model.k() > 0) {
    const Vector cq = ips.q_proj.transpose() * model.c();
    const Matrix M = ips.q_proj.transpose() * ips.q_proj;
    cql = A * cq;
    qn2 = (A * M).cwiseProduct(A).rowwise().sum();
  }

  const double floor = 1e-12 * std::max(model.max_diag(), 1e-300);
  for (Index j = 0; j < n; ++j) {
    if (!(dt[j] > floor)) {
      scores[j] = kNegInf;
      continue;
    }
    CandidateProjection p;
    p.ell_norm2 = ell2[j] / dt[j];
    p.u = (yl[j] - cql[j]) / std::sqrt(dt[j]);
    p.w = p.ell_norm2 + s2 - qn2[j] / dt[j];
    const auto delta = delta_from_projection(p, s2, flavor);
    scores[j] = delta ? delta->total() : kNegInf;
  }
  for (Index i : model.inducing()) {
    scores[i] = kNegInf;
  }
  return scores;
}

/// Scoring set for a downdated model: prepends the removed pivot's column,
/// which makes [ell, L_z] an exact partial Cholesky of the residual of the
/// downdated model with pivots (removed, J_z...).
inline InfoPivotSet with_leading_pivot(const InfoPivotSet &ips, Index removed,
                                       const Vector &ell,
                                       const FactoredModel &downdated) {
  InfoPivotSet out;
  out.requested = ips.requested;
  out.pivots.reserve(ips.pivots.size() + 1);
  out.pivots.push_back(removed);
  out.pivots.insert(out.pivots.end(), ips.pivots.begin(), ips.pivots.end());
  const Index z = ips.z();
  out.factor.resize(ell.size(), z + 1);
  out.factor.col(0) = ell;
  out.factor.rightCols(z) = ips.factor;
  out.gram.resize(z + 1, z + 1);
  out.gram(0, 0) = ell.squaredNorm();
  if (z > 0) {
    const Vector cross = ips.factor.transpose() * ell;
    out.gram.block(1, 0, z, 1) = cross;
    out.gram.block(0, 1, 1, z) = cross.transpose();
    out.gram.bottomRightCorner(z, z) = ips.gram;
  }
  out.y_proj.resize(z + 1);
  out.y_proj[0] = downdated.y().dot(ell);
  out.y_proj.tail(z) = ips.y_proj;
  sync_projections(out, downdated);
  return out;
}

/// After a swap (removed -> added) has been applied to the model: replaces
/// `added` in J_z by a fresh random pivot if needed and refactorizes L_z
/// against the new Nystrom approximation.
inline void update_on_swap(InfoPivotSet &ips, const FactoredModel &model,
                           Index removed, Index added, const KernelMatrix &K,
                           Rng &rng) {
  (void)removed;
  std::vector<Index> keep;
  keep.reserve(ips.pivots.size());
  for (Index p : ips.pivots) {
    if (p != added) {
      keep.push_back(p);
    }
  }
  // TODO: incremental O(zn) repair of L_z for z > 32; every size currently
  // rebuilds at O(z^2 n + zkn).
  ips = detail::factorize_residual(model, K, keep, ips.requested, rng);
}

} // namespace cholqr

#endif // CHOLQR_INFO_PIVOTS_HPP_
