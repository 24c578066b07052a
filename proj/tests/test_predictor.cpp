#include "cholqr/factor_core.hpp"
#include "cholqr/predictor.hpp"
#include "support/dense_oracle.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cholqr;
using namespace cholqr::testing;

namespace {

struct Split {
  KernelMatrix K;
  Matrix X_test;
  Vector y;
  Matrix Kd;   // train x train
  Matrix Kx;   // train x test
  Vector kxx;  // test diagonal
};

Split rbf_split(Index n, Index n_test, Rng &rng) {
  auto kernel = std::make_shared<const RbfArdKernel>(2);
  const Matrix X = random_points(n, 2, rng, 2.0);
  const Matrix Xt = random_points(n_test, 2, rng, 2.0);
  Vector p(3);
  p << 0.3, std::log(1.5), std::log(0.7);
  const KernelMatrix K(kernel, X, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = std::sin(X(i, 0)) * std::cos(X(i, 1)) + 0.1 * standard_normal(rng);
  }
  Split s{K, Xt, y, K.dense(), Matrix(n, n_test), Vector(n_test)};
  const Matrix XtT = Xt.transpose();
  for (Index t = 0; t < n_test; ++t) {
    for (Index i = 0; i < n; ++i) {
      s.Kx(i, t) = kernel->eval(p, K.point(i), XtT.col(t));
    }
    s.kxx[t] = kernel->eval(p, XtT.col(t), XtT.col(t));
  }
  return s;
}

std::vector<Prediction> constant_predictions(Index N, double mean, double var) {
  return std::vector<Prediction>(static_cast<std::size_t>(N),
                                 Prediction{mean, var, var});
}

} // namespace

TEST(Predict, MatchesDenseNystromOracle) {
  Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    const Split s = rbf_split(40, 12, rng);
    const std::vector<Index> I = sample_without_replacement(40, 8, rng);
    const double s2 = 0.05;
    const Predictor pred(s.K, s2, s.y, I);
    const auto got = pred.predict_all(s.X_test);
    const auto want = dense_nystrom_predict(s.Kd, s.Kx, s.kxx, s2, s.y, I,
                                            pred.jitter());
    for (std::size_t t = 0; t < got.size(); ++t) {
      EXPECT_NEAR(got[t].mean, want[t].mean, 1e-8);
      EXPECT_NEAR(got[t].latent_variance, want[t].latent_variance, 1e-8);
      EXPECT_NEAR(got[t].observation_variance, want[t].latent_variance + s2,
                  1e-8);
      EXPECT_GE(got[t].observation_variance, s2 - 1e-12);
      EXPECT_GE(got[t].latent_variance, -1e-8 * s.kxx[static_cast<Index>(t)]);
    }
  }
}

TEST(Predict, FullInducingSetMatchesFullGp) {
  Rng rng(82);
  const Split s = rbf_split(30, 10, rng);
  std::vector<Index> all;
  for (Index i = 0; i < 30; ++i) {
    all.push_back(i);
  }
  const double s2 = 0.1;
  const Predictor pred(s.K, s2, s.y, all);
  const auto got = pred.predict_all(s.X_test);
  const auto want = dense_full_predict(s.Kd, s.Kx, s.kxx, s2, s.y);
  for (std::size_t t = 0; t < got.size(); ++t) {
    EXPECT_NEAR(got[t].mean, want[t].mean, 1e-8);
    EXPECT_NEAR(got[t].observation_variance, want[t].latent_variance + s2, 1e-8);
  }
}

TEST(Predict, NoiseFreeInterpolationAtInducingPoints) {
  Rng rng(83);
  const Split s = rbf_split(25, 1, rng);
  const std::vector<Index> I = {2, 7, 11, 19};
  const Predictor pred(s.K, 1e-10, s.y, I);
  for (Index i : I) {
    const Prediction p = pred.predict(s.K.point(i));
    EXPECT_NEAR(p.latent_variance, 0.0, 1e-6);
  }
  std::vector<Index> all;
  for (Index i = 0; i < 25; ++i) {
    all.push_back(i);
  }
  const Predictor full(s.K, 1e-10, s.y, all);
  EXPECT_NEAR(full.predict(s.K.point(7)).mean, s.y[7], 1e-4);
}

TEST(Predict, InvariantUnderInducingPermutation) {
  Rng rng(84);
  const Split s = rbf_split(35, 8, rng);
  std::vector<Index> I = sample_without_replacement(35, 9, rng);
  // Order the set the way permute_to_end leaves it.
  FactoredModel m = FactoredModel::build(s.K, 0.05, s.y, I, 9).model;
  m.permute_to_end(I[0]);
  m.permute_to_end(I[4]);
  const auto a = Predictor(s.K, 0.05, s.y, I).predict_all(s.X_test);
  const auto b = Predictor(s.K, 0.05, s.y, m.inducing()).predict_all(s.X_test);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_NEAR(a[t].mean, b[t].mean, 1e-9);
    EXPECT_NEAR(a[t].observation_variance, b[t].observation_variance, 1e-9);
  }
}

TEST(Smse, PerfectPredictionsScoreZero) {
  Vector y(3);
  y << 1.0, -2.0, 0.5;
  std::vector<Prediction> p;
  for (Index t = 0; t < 3; ++t) {
    p.push_back({y[t], 1.0, 1.0});
  }
  EXPECT_EQ(smse(p, y), 0.0);
}

TEST(Smse, PredictingTestMeanScoresOne) {
  Vector y(4);
  y << 1.0, 3.0, -2.0, 6.0;
  EXPECT_NEAR(smse(constant_predictions(4, y.mean(), 1.0), y), 1.0, 1e-15);
}

TEST(Smse, HandArithmetic) {
  Vector y(2);
  y << 0.0, 2.0;
  EXPECT_NEAR(smse(constant_predictions(2, 1.0, 1.0), y), 1.0, 1e-15);
}

TEST(Smse, RejectsDegenerateInput) {
  EXPECT_THROW(smse(constant_predictions(1, 0.0, 1.0), Vector::Ones(1)),
               ConfigError);
  EXPECT_THROW(smse(constant_predictions(3, 0.0, 1.0), Vector::Ones(3)),
               ConfigError);
  EXPECT_THROW(smse(constant_predictions(2, 0.0, 1.0), Vector::Ones(3)),
               ConfigError);
}

TEST(Snlp, TrivialBaselineScoresZero) {
  Vector y(3);
  y << 0.3, -1.0, 2.0;
  EXPECT_NEAR(snlp(constant_predictions(3, 0.5, 2.0), y, 0.5, 2.0), 0.0, 1e-15);
}

TEST(Snlp, SharperCorrectPredictionsAreNegative) {
  Vector y(2);
  y << 1.0, -1.0;
  std::vector<Prediction> p = {{0.9, 0.1, 0.1}, {-0.9, 0.1, 0.1}};
  EXPECT_LT(snlp(p, y, 0.0, 1.0), 0.0);
}

TEST(Snlp, HandArithmetic) {
  // One point, mu = y = 1, v = 1, baseline N(0, 1):
  // 0.5 log 2 pi - (0.5 log 2 pi + 0.5) = -0.5.
  EXPECT_NEAR(snlp(constant_predictions(1, 1.0, 1.0), Vector::Ones(1), 0.0, 1.0),
              -0.5, 1e-15);
}

TEST(Snlp, RejectsBadVariances) {
  EXPECT_THROW(snlp(constant_predictions(1, 0.0, 0.0), Vector::Ones(1), 0.0, 1.0),
               NumericalError);
  EXPECT_THROW(snlp(constant_predictions(1, 0.0, 1.0), Vector::Ones(1), 0.0, 0.0),
               ConfigError);
}
