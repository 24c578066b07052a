#ifndef CHOLQR_HYPER_OPT_HPP_
#define CHOLQR_HYPER_OPT_HPP_

#include "cholqr/kernels.hpp"
#include "cholqr/nystrom_system.hpp"
#include "cholqr/objective.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace cholqr {

struct ObjectiveWithGradient {
  EnergyTerms terms;
  /// dF / d[log sigma^2, kernel params...]
  Vector grad;
  double jitter = 0.0;

  double value() const { return terms.value(); }
};

/// F and its gradient at fixed inducing set, in log space. The Nystrom form
/// K_hat = K[:,I] K[I,I]^{-1} K[I,:] is differentiated directly; the cost is
/// O(m^2 n) shared plus O(m n) per kernel parameter.
inline ObjectiveWithGradient objective_and_grad(const KernelMatrix &base,
                                                const Hyperparameters &theta,
                                                const Vector &y,
                                                const std::vector<Index> &I,
                                                Flavor flavor) {
  const KernelMatrix K = base.with_params(theta.kernel_params);
  const double s = theta.noise_var();
  const NystromSystem sys = NystromSystem::build(K, s, y, I);
  const Index n = K.size();
  const Index m = sys.m();
  const Index P = K.num_params();
  const auto nd = static_cast<double>(n);
  const auto md = static_cast<double>(m);

  ObjectiveWithGradient out;
  out.jitter = sys.jitter;
  out.terms.flavor = flavor;
  const Vector Phiy = sys.Phi * y;
  const double trK = K.diag().sum();
  const double trKhat = sys.Phi.squaredNorm();
  out.terms.data = (y.squaredNorm() - Phiy.dot(sys.beta)) / s;
  out.terms.complexity = (nd - md) * std::log(s) + sys.log_det_B();
  out.terms.trace = (trK - trKhat) / s;

  const Vector r = y - sys.Phi.transpose() * sys.beta;
  const auto U_A = sys.chol_A.matrixU();
  const Matrix V = U_A.solve(sys.Phi);                    // A^{-1} Kmn
  const Matrix W = U_A.solve(sys.chol_B.solve(sys.Phi)); // B_full^{-1} Kmn
  const Matrix Linv =
      sys.chol_A.matrixL().solve(Matrix::Identity(m, m));
  const Matrix Ainv = Linv.transpose() * Linv;
  const Matrix Binv = Linv.transpose() * sys.chol_B.solve(Linv);
  const Matrix Pm = V * V.transpose();

  const bool var = flavor == Flavor::VAR;
  out.grad.resize(1 + P);
  {
    const double gD = -r.squaredNorm() / s;
    const double gC = nd - W.cwiseProduct(sys.Kmn).sum();
    const double gV = -out.terms.trace;
    out.grad[0] = 0.5 * (gD + gC + (var ? gV : 0.0));
  }

  const Vector dtr = K.trace_grad();
  std::vector<Matrix> dKmn(static_cast<std::size_t>(P), Matrix(m, n));
  for (Index a = 0; a < m; ++a) {
    const Matrix cg = K.column_grad(I[static_cast<std::size_t>(a)]);
    for (Index p = 0; p < P; ++p) {
      dKmn[static_cast<std::size_t>(p)].row(a) = cg.col(p).transpose();
    }
  }
  Matrix dA(m, m);
  double mean_diag = 0.0;
  for (Index a = 0; a < m; ++a) {
    mean_diag += sys.Kmn(a, I[static_cast<std::size_t>(a)]) / md;
  }
  const double jitter_rel = mean_diag > 0.0 ? sys.jitter / mean_diag : 0.0;
  for (Index p = 0; p < P; ++p) {
    const Matrix &dK = dKmn[static_cast<std::size_t>(p)];
    for (Index b = 0; b < m; ++b) {
      dA.col(b) = dK.col(I[static_cast<std::size_t>(b)]);
    }
    // The jitter is proportional to the mean diagonal of K[I,I], so it moves
    // with the kernel parameters too. Ignoring that is an O(1) error once
    // K[I,I] is near singular.
    if (jitter_rel > 0.0) {
      dA.diagonal().array() += jitter_rel * dA.diagonal().mean();
    }
    const double gD =
        -(2.0 / s) * sys.alpha.dot(dK * r) + sys.alpha.dot(dA * sys.alpha);
    const double gC = s * Binv.cwiseProduct(dA).sum() +
                      2.0 * W.cwiseProduct(dK).sum() -
                      Ainv.cwiseProduct(dA).sum();
    const double gV = (dtr[p] + Pm.cwiseProduct(dA).sum() -
                       2.0 * V.cwiseProduct(dK).sum()) /
                      s;
    out.grad[1 + p] = 0.5 * (gD + gC + (var ? gV : 0.0));
  }
  return out;
}

inline Index default_max_fevals(Index num_hyperparameters) {
  return std::min<Index>(20, std::max<Index>(15, 2 * num_hyperparameters));
}

struct CGConfig {
  /// 0 selects min(20, max(15, 2d)).
  Index max_fevals = 0;
  double c1 = 1e-4;
  double c2 = 0.1;
  /// Stop when ||g|| < grad_tol * (1 + |F|).
  double grad_tol = 1e-6;
  /// 0 restarts every d iterations.
  Index restart_every = 0;

  Index fevals_for(Index d) const {
    return max_fevals > 0 ? max_fevals : default_max_fevals(d);
  }
};

struct CGResult {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  Vector grad;
  Index fevals = 0;
  Index iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// f(x, grad) -> value; must write the gradient when the value is finite.
using ObjectiveFn = std::function<double(const Vector &, Vector &)>;

namespace detail {

/// Minimizer of the cubic through (a, fa, ga), (b, fb, gb), kept inside the
/// interval with a 10% margin; bisection when the fit is unusable.
inline double cubic_step(double a, double fa, double ga, double b, double fb,
                         double gb) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  double t = 0.5 * (a + b);
  if (std::isfinite(fb) && std::isfinite(gb)) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), b - a);
      const double denom = gb - ga + 2.0 * d2;
      if (denom != 0.0) {
        const double cand = b - (b - a) * (gb + d2 - d1) / denom;
        if (std::isfinite(cand)) {
          t = cand;
        }
      }
    }
  }
  return std::clamp(t, lo + margin, hi - margin);
}

struct LineSearchPoint {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;
  Vector x;
  Vector grad;
};

} // namespace detail

/// Polak-Ribiere+ nonlinear conjugate gradients with a strong-Wolfe line
/// search. Returns the best point evaluated, so f(result) <= f(x0).
inline CGResult cg_minimize(const ObjectiveFn &fn, Vector x0,
                            const CGConfig &cfg, Index max_iterations = 1000) {
  const Index d = x0.size();
  const Index budget = cfg.fevals_for(d);
  const Index restart = cfg.restart_every > 0 ? cfg.restart_every : d;

  CGResult best;
  Index fevals = 0;
  auto evaluate = [&](const Vector &x, Vector &g) {
    g = Vector::Zero(d);
    double f = fn(x, g);
    ++fevals;
    if (!std::isfinite(f) || !g.allFinite()) {
      f = std::numeric_limits<double>::infinity();
    }
    if (f < best.f) {
      best.f = f;
      best.x = x;
      best.grad = g;
    }
    return f;
  };

  Vector g;
  double f = evaluate(x0, g);
  if (!std::isfinite(f)) {
    best.x = x0;
    best.fevals = fevals;
    best.line_search_failed = true;
    return best;
  }
  Vector x = x0;
  Vector dir = -g;
  double prev_alpha = 0.0;
  double prev_slope = 0.0;
  Index since_restart = 0;

  for (Index iter = 0; iter < max_iterations; ++iter) {
    if (g.norm() < cfg.grad_tol * (1.0 + std::abs(f))) {
      best.converged = true;
      break;
    }
    if (fevals >= budget) {
      break;
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -g.squaredNorm();
      since_restart = 0;
    }
    double alpha = iter == 0 || prev_alpha <= 0.0
                       ? 1.0 / std::max(1.0, dir.lpNorm<Eigen::Infinity>())
                       : prev_alpha * prev_slope / slope;
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      alpha = 1.0 / std::max(1.0, dir.lpNorm<Eigen::Infinity>());
    }

    // Strong-Wolfe bracketing and zoom.
    detail::LineSearchPoint lo{0.0, f, slope, x, g};
    detail::LineSearchPoint accepted;
    bool found = false;
    bool zooming = false;
    detail::LineSearchPoint hi;
    detail::LineSearchPoint trial;
    double step = alpha;
    while (fevals < budget) {
      if (zooming) {
        step = detail::cubic_step(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f,
                                  hi.slope);
      }
      trial.alpha = step;
      trial.x = x + step * dir;
      trial.f = evaluate(trial.x, trial.grad);
      trial.slope = std::isfinite(trial.f)
                        ? trial.grad.dot(dir)
                        : std::numeric_limits<double>::infinity();
      const bool armijo = trial.f <= f + cfg.c1 * step * slope;
      if (!zooming) {
        if (!armijo || (lo.alpha > 0.0 && trial.f >= lo.f)) {
          hi = trial;
          zooming = true;
          continue;
        }
        if (std::abs(trial.slope) <= -cfg.c2 * slope) {
          accepted = trial;
          found = true;
          break;
        }
        if (trial.slope >= 0.0) {
          hi = lo;
          lo = trial;
          zooming = true;
          continue;
        }
        lo = trial;
        step = 2.0 * step;
        continue;
      }
      if (!armijo || trial.f >= lo.f) {
        hi = trial;
      } else {
        if (std::abs(trial.slope) <= -cfg.c2 * slope) {
          accepted = trial;
          found = true;
          break;
        }
        if (trial.slope * (hi.alpha - lo.alpha) >= 0.0) {
          hi = lo;
        }
        lo = trial;
      }
      if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) {
        break;
      }
    }
    ++best.iterations;
    if (!found) {
      // Budget exhausted or interval collapsed: keep any decrease found.
      if (lo.alpha > 0.0 && lo.f < f) {
        accepted = lo;
      } else {
        best.line_search_failed = true;
        break;
      }
    }

    const Vector g_new = accepted.grad;
    const double denom = g.squaredNorm();
    double beta = denom > 0.0 ? g_new.dot(g_new - g) / denom : 0.0;
    beta = std::max(0.0, beta);
    if (++since_restart >= restart) {
      beta = 0.0;
      since_restart = 0;
    }
    prev_alpha = accepted.alpha;
    prev_slope = slope;
    x = accepted.x;
    f = accepted.f;
    g = g_new;
    dir = -g + beta * dir;
  }
  best.fevals = fevals;
  return best;
}

struct HyperOptResult {
  Hyperparameters theta;
  double F = 0.0;
  Index fevals = 0;
  bool line_search_failed = false;
};

/// Bounded CG on the hyperparameters with the inducing set held fixed.
inline HyperOptResult cg_optimize(const KernelMatrix &base,
                                  const Hyperparameters &theta0,
                                  const Vector &y, const std::vector<Index> &I,
                                  Flavor flavor, const CGConfig &cfg = {}) {
  ObjectiveFn fn = [&](const Vector &flat, Vector &grad) {
    const Hyperparameters theta = Hyperparameters::unflatten(flat);
    if (!theta.finite()) {
      return std::numeric_limits<double>::infinity();
    }
    try {
      const auto og = objective_and_grad(base, theta, y, I, flavor);
      grad = og.grad;
      return og.value();
    } catch (const NumericalError &) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const CGResult res = cg_minimize(fn, theta0.flatten(), cfg);
  HyperOptResult out;
  out.theta = Hyperparameters::unflatten(res.x);
  out.F = res.f;
  out.fevals = res.fevals;
  out.line_search_failed = res.line_search_failed;
  return out;
}

} // namespace cholqr

#endif // CHOLQR_HYPER_OPT_HPP_
