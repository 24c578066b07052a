#ifndef CHOLQR_PREDICTOR_HPP_
#define CHOLQR_PREDICTOR_HPP_

#include "cholqr/kernels.hpp"
#include "cholqr/nystrom_system.hpp"

#include <cmath>
#include <vector>

namespace cholqr {

struct Prediction {
  double mean = 0.0;
  double latent_variance = 0.0;
  /// latent_variance + sigma^2
  double observation_variance = 0.0;
};

/// Projected-process predictive distribution. Construction does the
/// O(m^2 n) solve; each prediction then costs O(m) kernel evaluations plus
/// O(m^2) for the variance.
class Predictor {
public:
  Predictor(const KernelMatrix &K, double sigma2, const Vector &y,
            std::vector<Index> inducing)
      : K_(K), system_(NystromSystem::build(K, sigma2, y, inducing)),
        inducing_(std::move(inducing)) {}

  const std::vector<Index> &inducing() const { return inducing_; }
  double sigma2() const { return system_.sigma2; }
  /// Jitter that was added to K[I,I].
  double jitter() const { return system_.jitter; }

  /// x is a point in the same encoding as the training inputs.
  Prediction predict(Point x) const {
    const Vector ks = K_.cross(x, inducing_);
    Prediction p;
    p.mean = ks.dot(system_.alpha);
    const Vector a = system_.chol_A.matrixL().solve(ks);
    const Vector b = system_.chol_B.matrixL().solve(a);
    p.latent_variance =
        K_.self(x) - a.squaredNorm() + system_.sigma2 * b.squaredNorm();
    p.observation_variance = p.latent_variance + system_.sigma2;
    return p;
  }

  /// One prediction per row of `inputs`.
  std::vector<Prediction> predict_all(const Matrix &inputs) const {
    std::vector<Prediction> out;
    out.reserve(static_cast<std::size_t>(inputs.rows()));
    const Matrix points = inputs.transpose();
    for (Index t = 0; t < points.cols(); ++t) {
      out.push_back(predict(points.col(t)));
    }
    return out;
  }

private:
  KernelMatrix K_;
  NystromSystem system_;
  std::vector<Index> inducing_;
};

/// (1/N) sum (mu_t - y_t)^2 / var(y_test), with the 1/N test variance.
inline double smse(const std::vector<Prediction> &preds, const Vector &y_test) {
  const auto N = static_cast<Index>(preds.size());
  if (N != y_test.size()) {
    throw ConfigError("smse: prediction/target count mismatch");
  }
  if (N < 2) {
    throw ConfigError("smse: needs at least two test points");
  }
  const double mean = y_test.mean();
  const double var = (y_test.array() - mean).square().mean();
  if (!(var > 0.0)) {
    throw ConfigError("smse: test targets have zero variance");
  }
  double sq = 0.0;
  for (Index t = 0; t < N; ++t) {
    const double e = preds[static_cast<std::size_t>(t)].mean - y_test[t];
    sq += e * e;
  }
  return sq / static_cast<double>(N) / var;
}

/// Mean negative log predictive density minus that of N(train_mean,
/// train_var), so the trivial predictor scores 0 and better is negative.
inline double snlp(const std::vector<Prediction> &preds, const Vector &y_test,
                   double train_mean, double train_var) {
  const auto N = static_cast<Index>(preds.size());
  if (N != y_test.size() || N == 0) {
    throw ConfigError("snlp: prediction/target count mismatch");
  }
  if (!(train_var > 0.0)) {
    throw ConfigError("snlp: baseline variance must be positive");
  }
  constexpr double kLog2Pi = 1.8378770664093453;
  double total = 0.0;
  for (Index t = 0; t < N; ++t) {
    const Prediction &p = preds[static_cast<std::size_t>(t)];
    if (!(p.observation_variance > 0.0)) {
      throw NumericalError("snlp: non-positive predictive variance");
    }
    const double e = y_test[t] - p.mean;
    const double model_nlp = 0.5 * (kLog2Pi + std::log(p.observation_variance)) +
                             e * e / (2.0 * p.observation_variance);
    const double e0 = y_test[t] - train_mean;
    const double base_nlp =
        0.5 * (kLog2Pi + std::log(train_var)) + e0 * e0 / (2.0 * train_var);
    total += model_nlp - base_nlp;
  }
  return total / static_cast<double>(N);
}

} // namespace cholqr

#endif // CHOLQR_PREDICTOR_HPP_
