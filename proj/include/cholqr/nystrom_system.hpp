#ifndef CHOLQR_NYSTROM_SYSTEM_HPP_
#define CHOLQR_NYSTROM_SYSTEM_HPP_

#include "cholqr/kernels.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace cholqr {

/// Jitter added to K[I,I] before factorization, as a multiple of its mean
/// diagonal; escalated by 10x on failure up to kMaxJitter.
inline constexpr double kInitialJitter = 1e-10;
inline constexpr double kMaxJitter = 1e-6;

/// Woodbury-factored solves for the Nystrom model at fixed (theta, I),
/// written in the well-conditioned form
///
///     A = K[I,I] + eps I = L_A L_A^T,   Phi = L_A^{-1} K[I,:],
///     B = sigma^2 I + Phi Phi^T = L_B L_B^T,
///
/// so K_hat = Phi^T Phi and no n x n matrix is ever formed.
struct NystromSystem {
  std::vector<Index> inducing;
  double sigma2 = 1.0;
  double jitter = 0.0;
  Matrix Kmn;   // K[I,:]
  Eigen::LLT<Matrix> chol_A;
  Matrix Phi;
  Eigen::LLT<Matrix> chol_B;
  Vector beta;  // B^{-1} Phi y
  Vector alpha; // (sigma^2 A + Kmn Kmn^T)^{-1} Kmn y = L_A^{-T} beta

  Index m() const { return static_cast<Index>(inducing.size()); }

  static NystromSystem build(const KernelMatrix &K, double sigma2,
                             const Vector &y, std::vector<Index> inducing) {
    NystromSystem sys;
    sys.inducing = std::move(inducing);
    sys.sigma2 = sigma2;
    const Index m = sys.m();
    const Index n = K.size();
    sys.Kmn.resize(m, n);
    for (Index a = 0; a < m; ++a) {
      sys.Kmn.row(a) = K.column(sys.inducing[static_cast<std::size_t>(a)])
                           .transpose();
    }
    Matrix A(m, m);
    for (Index a = 0; a < m; ++a) {
      A.col(a) = sys.Kmn.col(sys.inducing[static_cast<std::size_t>(a)]);
    }
    A = 0.5 * (A + A.transpose()).eval();
    const double mean_diag = m > 0 ? A.diagonal().mean() : 1.0;
    const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
    bool ok = false;
    for (double rel = kInitialJitter; rel <= kMaxJitter * 1.0000001;
         rel *= 10.0) {
      sys.jitter = rel * scale;
      Matrix Aj = A;
      Aj.diagonal().array() += sys.jitter;
      sys.chol_A.compute(Aj);
      if (sys.chol_A.info() == Eigen::Success &&
          (sys.chol_A.matrixLLT().diagonal().array() > 0.0).all()) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw NumericalError("K[I,I] is not positive definite even with jitter " +
                           std::to_string(kMaxJitter) + " x mean diagonal");
    }
    sys.Phi = sys.chol_A.matrixL().solve(sys.Kmn);
    Matrix B = sys.Phi * sys.Phi.transpose();
    B.diagonal().array() += sigma2;
    sys.chol_B.compute(B);
    if (sys.chol_B.info() != Eigen::Success) {
      throw NumericalError("sigma^2 I + Phi Phi^T factorization failed");
    }
    sys.beta = sys.chol_B.solve(sys.Phi * y);
    sys.alpha = sys.chol_A.matrixU().solve(sys.beta);
    return sys;
  }

  double log_det_B() const {
    return 2.0 * chol_B.matrixLLT().diagonal().array().log().sum();
  }
};

} // namespace cholqr

#endif // CHOLQR_NYSTROM_SYSTEM_HPP_
