#ifndef CHOLQR_OBJECTIVE_HPP_
#define CHOLQR_OBJECTIVE_HPP_

#include "cholqr/factor_core.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace cholqr {

/// MLE: projected-process negative log marginal likelihood.
/// VAR: variational free energy (MLE plus the trace term).
enum class Flavor { MLE, VAR };

inline std::string to_string(Flavor f) { return f == Flavor::MLE ? "mle" : "var"; }

inline Flavor parse_flavor(const std::string &s) {
  if (s == "mle" || s == "MLE") {
    return Flavor::MLE;
  }
  if (s == "var" || s == "VAR") {
    return Flavor::VAR;
  }
  throw ConfigError("unknown objective flavor '" + s + "' (expected mle|var)");
}

/// Objective terms, all without the constant n/2 log(2 pi).
struct EnergyTerms {
  double data = 0.0;
  double complexity = 0.0;
  double trace = 0.0;
  Flavor flavor = Flavor::VAR;

  double value() const {
    return flavor == Flavor::VAR ? 0.5 * (data + complexity + trace)
                                 : 0.5 * (data + complexity);
  }
};

/// Decrease of each term when one pivot is added: F(I) - F(I + j).
struct DeltaTerms {
  double data = 0.0;
  double complexity = 0.0;
  double trace = 0.0;
  Flavor flavor = Flavor::VAR;

  double total() const {
    return flavor == Flavor::VAR ? 0.5 * (data + complexity + trace)
                                 : 0.5 * (data + complexity);
  }
};

/// Reads the objective off the cached factors in O(n + k).
inline EnergyTerms energy(const FactoredModel &model, Flavor flavor) {
  const double s2 = model.sigma2();
  EnergyTerms e;
  e.flavor = flavor;
  e.data = (model.y_norm2() - model.c().squaredNorm()) / s2;
  e.complexity = static_cast<double>(model.n() - model.k()) * std::log(s2) +
                 2.0 * model.log_det_R();
  e.trace = model.residual_diag().sum() / s2;
  return e;
}

/// The two quantities every candidate score is built from:
///   u = y_aug^T (I - Q Q^T) ell_aug,  w = ||(I - Q Q^T) ell_aug||^2,
/// given ||ell||^2, y^T ell and Q[1:n,:]^T ell.
struct CandidateProjection {
  double ell_norm2 = 0.0;
  double u = 0.0;
  double w = 0.0;
};

inline std::optional<DeltaTerms> delta_from_projection(
    const CandidateProjection &p, double sigma2, Flavor flavor) {
  if (!(p.w > kMinOrthoNorm)) {
    return std::nullopt;
  }
  DeltaTerms dt;
  dt.flavor = flavor;
  dt.data = p.u * p.u / (sigma2 * p.w);
  dt.complexity = std::log(sigma2) - std::log(p.w);
  dt.trace = p.ell_norm2 / sigma2;
  return dt;
}

/// Exact decrease in each term from appending the residual column ell.
/// O(k n). nullopt for a numerically degenerate candidate.
inline std::optional<DeltaTerms> exact_delta(const FactoredModel &model,
                                             const Vector &ell,
                                             Flavor flavor) {
  CandidateProjection p;
  p.ell_norm2 = ell.squaredNorm();
  const double yl = model.y().dot(ell);
  if (model.k() > 0) {
    const Vector ql = model.Q_top().transpose() * ell;
    p.u = yl - model.c().dot(ql);
    p.w = p.ell_norm2 + model.sigma2() - ql.squaredNorm();
  } else {
    p.u = yl;
    p.w = p.ell_norm2 + model.sigma2();
  }
  return delta_from_projection(p, model.sigma2(), flavor);
}

} // namespace cholqr

#endif // CHOLQR_OBJECTIVE_HPP_
