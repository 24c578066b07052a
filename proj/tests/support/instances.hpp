#ifndef CHOLQR_TESTS_INSTANCES_HPP_
#define CHOLQR_TESTS_INSTANCES_HPP_

#include "cholqr/kernels.hpp"
#include "cholqr/random.hpp"

#include <memory>
#include <vector>

namespace cholqr::testing {

/// A random symmetric PSD matrix G G^T / r + ridge I with r >= n, so every
/// principal submatrix is comfortably positive definite.
inline Matrix random_psd(Index n, Rng &rng, double ridge = 0.05) {
  const Index r = n + 4;
  Matrix G(n, r);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < r; ++j) {
      G(i, j) = standard_normal(rng);
    }
  }
  Matrix K = G * G.transpose() / static_cast<double>(r);
  K.diagonal().array() += ridge;
  return 0.5 * (K + K.transpose());
}

inline Vector random_vector(Index n, Rng &rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v[i] = standard_normal(rng);
  }
  return v;
}

/// Inputs 0..n-1 encoded for the precomputed kernel.
inline Matrix index_inputs(Index n) {
  Matrix X(n, 1);
  for (Index i = 0; i < n; ++i) {
    X(i, 0) = static_cast<double>(i);
  }
  return X;
}

/// A kernel matrix over a single precomputed base with unit weight.
inline KernelMatrix precomputed_matrix(const Matrix &K) {
  auto kernel = std::make_shared<const PrecomputedCompoundKernel>(
      std::vector<Matrix>{K});
  return KernelMatrix(kernel, index_inputs(K.rows()), Vector::Zero(1));
}

struct RandomInstance {
  Matrix K;
  Vector y;
  double sigma2 = 0.1;
  std::vector<Index> inducing;
};

/// n in [lo_n, hi_n], k in [1, min(max_k, n)], random PSD K and targets.
inline RandomInstance random_instance(Rng &rng, Index lo_n = 8,
                                      Index hi_n = 64, Index max_k = 16) {
  RandomInstance inst;
  const Index n =
      lo_n + static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(
                                                       hi_n - lo_n + 1)));
  inst.K = random_psd(n, rng);
  inst.y = random_vector(n, rng);
  inst.sigma2 = 0.02 + 0.5 * uniform_unit(rng);
  const Index k =
      1 + static_cast<Index>(uniform_below(
              rng, static_cast<std::uint64_t>(std::min(max_k, n))));
  inst.inducing = sample_without_replacement(n, k, rng);
  return inst;
}

/// Points on a line for RBF tests.
inline Matrix random_points(Index n, Index dim, Rng &rng, double scale = 1.0) {
  Matrix X(n, dim);
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < dim; ++t) {
      X(i, t) = scale * (2.0 * uniform_unit(rng) - 1.0);
    }
  }
  return X;
}

} // namespace cholqr::testing

#endif // CHOLQR_TESTS_INSTANCES_HPP_
