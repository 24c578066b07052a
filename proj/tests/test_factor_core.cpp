#include "cholqr/factor_core.hpp"
#include "cholqr/objective.hpp"
#include "support/dense_oracle.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>

using namespace cholqr;
using namespace cholqr::testing;

namespace {

double max_abs_diff(const Matrix &a, const Matrix &b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

FactoredModel build_on(const KernelMatrix &K, double sigma2, const Vector &y,
                       const std::vector<Index> &I) {
  auto built = FactoredModel::build(K, sigma2, y, I, 4);
  EXPECT_TRUE(built.skipped.empty());
  return std::move(built.model);
}

void expect_invariants(const FactoredModel &m, const Matrix &K) {
  const double tol = 1e-8 * K.diagonal().maxCoeff();
  EXPECT_LE(m.orthogonality_error(), 1e-8);
  EXPECT_LE(m.qr_residual(), 1e-8);
  for (Index p = 0; p < m.k(); ++p) {
    EXPECT_GT(m.R()(p, p), 0.0);
  }
  EXPECT_GE(m.residual_diag().minCoeff(), -tol);
  for (Index i : m.inducing()) {
    EXPECT_LE(std::abs(m.residual_diag()[i]), tol);
  }
  const Matrix LLt = m.L() * m.L().transpose();
  EXPECT_LE((LLt - dense_nystrom(K, m.inducing())).norm(), 1e-7 * K.norm());
  // d tracks diag(K - L L^T).
  const Vector d_dense = K.diagonal() - LLt.diagonal();
  EXPECT_LE((m.residual_diag() - d_dense).cwiseAbs().maxCoeff(), tol);
}

// Positive-diagonal QR is unique, so a rebuild on the same order must agree.
void expect_matches_rebuild(const FactoredModel &m, const KernelMatrix &K,
                            double tol) {
  const FactoredModel ref = build_on(K, m.sigma2(), m.y(), m.inducing());
  ASSERT_EQ(ref.inducing(), m.inducing());
  EXPECT_LE(max_abs_diff(m.L(), ref.L()), tol);
  EXPECT_LE(max_abs_diff(m.Q(), ref.Q()), tol);
  EXPECT_LE(max_abs_diff(m.R(), ref.R()), tol);
  EXPECT_LE(max_abs_diff(m.c(), ref.c()), tol);
  EXPECT_LE((m.residual_diag() - ref.residual_diag()).cwiseAbs().maxCoeff(),
            tol);
}

Matrix two_by_two() {
  Matrix K(2, 2);
  K << 4.0, 2.0, 2.0, 3.0;
  return K;
}

} // namespace

TEST(Build, TwoByTwoSinglePivot) {
  const Matrix Kd = two_by_two();
  const KernelMatrix K = precomputed_matrix(Kd);
  const FactoredModel m = build_on(K, 1.0, Vector::Ones(2), {0});
  EXPECT_NEAR(m.L()(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(m.L()(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(m.residual_diag()[0], 0.0, 1e-15);
  EXPECT_NEAR(m.residual_diag()[1], 2.0, 1e-15);
  expect_invariants(m, Kd);
}

TEST(Build, AllIndicesReproducesK) {
  Rng rng(11);
  const Matrix Kd = random_psd(12, rng);
  std::vector<Index> all(12);
  for (Index i = 0; i < 12; ++i) {
    all[static_cast<std::size_t>(i)] = i;
  }
  shuffle_in_place(all, rng);
  const FactoredModel m =
      build_on(precomputed_matrix(Kd), 0.3, random_vector(12, rng), all);
  EXPECT_LE((m.L() * m.L().transpose() - Kd).norm(), 1e-8 * Kd.norm());
  EXPECT_LE(m.residual_diag().cwiseAbs().maxCoeff(), 1e-10);
  expect_invariants(m, Kd);
}

TEST(Build, EmptyInducingSet) {
  Rng rng(12);
  const Matrix Kd = random_psd(6, rng);
  const FactoredModel m =
      build_on(precomputed_matrix(Kd), 0.5, random_vector(6, rng), {});
  EXPECT_EQ(m.k(), 0);
  EXPECT_EQ(m.residual_diag(), Vector(Kd.diagonal()));
  EXPECT_DOUBLE_EQ(m.trace_k(), Kd.trace());
}

TEST(Build, DegeneratePivotIsSkippedAndReported) {
  // Points 0 and 1 are identical, so 1 adds nothing once 0 is in.
  Matrix Kd(3, 3);
  Kd << 2.0, 2.0, 0.5, 2.0, 2.0, 0.5, 0.5, 0.5, 1.0;
  auto built = FactoredModel::build(precomputed_matrix(Kd), 0.1,
                                    Vector::Ones(3), {0, 1, 2}, 3);
  EXPECT_EQ(built.skipped, std::vector<Index>{1});
  EXPECT_EQ(built.model.inducing(), (std::vector<Index>{0, 2}));
}

TEST(Build, RejectsDuplicatesAndBadNoise) {
  const KernelMatrix K = precomputed_matrix(two_by_two());
  EXPECT_ANY_THROW(FactoredModel::build(K, 1.0, Vector::Ones(2), {0, 0}, 2));
  EXPECT_ANY_THROW(FactoredModel::build(K, 0.0, Vector::Ones(2), {0}, 2));
  EXPECT_ANY_THROW(FactoredModel::build(K, 1.0, Vector::Ones(3), {0}, 2));
}

TEST(ResidualColumn, TwoByTwo) {
  const KernelMatrix K = precomputed_matrix(two_by_two());
  const FactoredModel m = build_on(K, 1.0, Vector::Ones(2), {0});
  const auto ell = m.residual_column(K, 1);
  ASSERT_TRUE(ell.has_value());
  EXPECT_NEAR((*ell)[0], 0.0, 1e-15);
  EXPECT_NEAR((*ell)[1], std::sqrt(2.0), 1e-15);
}

TEST(ResidualColumn, DuplicatePointHasNoResidual) {
  Matrix Kd(3, 3);
  Kd << 2.0, 2.0, 0.5, 2.0, 2.0, 0.5, 0.5, 0.5, 1.0;
  const KernelMatrix K = precomputed_matrix(Kd);
  const FactoredModel m = build_on(K, 1.0, Vector::Ones(3), {0});
  EXPECT_FALSE(m.residual_column(K, 1).has_value());
  EXPECT_FALSE(m.residual_column(K, 0).has_value());
}

TEST(ResidualColumn, EmptyModelGivesFirstCholeskyColumn) {
  Rng rng(13);
  const Matrix Kd = random_psd(5, rng);
  const KernelMatrix K = precomputed_matrix(Kd);
  const FactoredModel m = build_on(K, 1.0, random_vector(5, rng), {});
  const auto ell = m.residual_column(K, 3);
  ASSERT_TRUE(ell.has_value());
  EXPECT_LE((*ell - Kd.col(3) / std::sqrt(Kd(3, 3))).norm(), 1e-14);
}

TEST(Append, FirstColumnIsNormalizedAugmentedColumn) {
  Rng rng(14);
  const Matrix Kd = random_psd(5, rng);
  const KernelMatrix K = precomputed_matrix(Kd);
  FactoredModel m = build_on(K, 0.4, random_vector(5, rng), {});
  const Vector ell = *m.residual_column(K, 2);
  ASSERT_TRUE(m.append_pivot(2, ell));
  Vector aug(6);
  aug << ell, std::sqrt(0.4);
  EXPECT_NEAR(m.R()(0, 0), aug.norm(), 1e-14);
  EXPECT_LE((Vector(m.Q().col(0)) - aug / aug.norm()).norm(), 1e-14);
}

TEST(Append, PaddingIdentityAndRebuildAgreement) {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    RandomInstance inst = random_instance(rng, 8, 40, 10);
    const KernelMatrix K = precomputed_matrix(inst.K);
    FactoredModel m = build_on(K, inst.sigma2, inst.y, inst.inducing);
    Index j = 0;
    while (m.contains(j)) {
      ++j;
    }
    if (j >= m.n()) {
      continue;
    }
    const Vector ell = *m.residual_column(K, j);
    const Vector qt = m.Q_top().transpose() * ell;
    const double w = ell.squaredNorm() + inst.sigma2 - qt.squaredNorm();
    ASSERT_TRUE(m.append_pivot(j, ell));
    // The new diagonal entry of R is the norm of the projected column.
    EXPECT_NEAR(m.R()(m.k() - 1, m.k() - 1), std::sqrt(w), 1e-10);
    expect_invariants(m, inst.K);
    expect_matches_rebuild(m, K, 1e-8);
  }
}

TEST(Append, RejectsDependentDirectionAndLeavesModelUnchanged) {
  Rng rng(16);
  const Matrix Kd = random_psd(4, rng);
  const KernelMatrix K = precomputed_matrix(Kd);
  FactoredModel m = build_on(K, 1e-30, random_vector(4, rng), {0, 1, 2, 3});
  // With every point inducing and negligible noise there is nowhere left to go.
  FactoredModel small = build_on(K, 1e-30, m.y(), {});
  EXPECT_FALSE(small.append_pivot(0, Vector::Zero(4)));
  EXPECT_EQ(small.k(), 0);
  EXPECT_ANY_THROW(m.append_pivot(0, Vector::Zero(4)));
}

TEST(Permute, TwoPivotsReversedMatchesReversedBuild) {
  Rng rng(17);
  const Matrix Kd = random_psd(9, rng);
  const KernelMatrix K = precomputed_matrix(Kd);
  FactoredModel m = build_on(K, 0.2, random_vector(9, rng), {3, 7});
  m.permute_to_end(3);
  EXPECT_EQ(m.inducing(), (std::vector<Index>{7, 3}));
  expect_matches_rebuild(m, K, 1e-10);
}

TEST(Permute, PreservesModelAndEnergy) {
  Rng rng(18);
  for (int trial = 0; trial < 30; ++trial) {
    RandomInstance inst = random_instance(rng, 8, 64, 16);
    const KernelMatrix K = precomputed_matrix(inst.K);
    FactoredModel m = build_on(K, inst.sigma2, inst.y, inst.inducing);
    const Matrix before = m.L() * m.L().transpose();
    const double F_before = energy(m, Flavor::VAR).value();
    const Index victim =
        inst.inducing[uniform_below(rng, inst.inducing.size())];
    m.permute_to_end(victim);
    EXPECT_EQ(m.inducing().back(), victim);
    const Matrix after = m.L() * m.L().transpose();
    EXPECT_LE((after - before).norm(), 1e-9 * inst.K.norm());
    EXPECT_LE(std::abs(energy(m, Flavor::VAR).value() - F_before),
              1e-8 * std::abs(F_before));
    expect_invariants(m, inst.K);
    expect_matches_rebuild(m, K, 1e-8);
  }
}

TEST(Permute, UnknownIndexIsAHardError) {
  const KernelMatrix K = precomputed_matrix(two_by_two());
  FactoredModel m = build_on(K, 1.0, Vector::Ones(2), {0});
  EXPECT_THROW(m.permute_to_end(1), std::logic_error);
}

TEST(Downdate, InvertsAppend) {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    RandomInstance inst = random_instance(rng, 8, 48, 12);
    const KernelMatrix K = precomputed_matrix(inst.K);
    FactoredModel m = build_on(K, inst.sigma2, inst.y, inst.inducing);
    const FactoredModel original = m;
    Index j = 0;
    while (m.contains(j)) {
      ++j;
    }
    if (j >= m.n()) {
      continue;
    }
    const Vector ell = *m.residual_column(K, j);
    ASSERT_TRUE(m.append_pivot(j, ell));
    const Vector dropped = m.downdate();
    EXPECT_LE((dropped - ell).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(m.inducing(), original.inducing());
    EXPECT_LE(max_abs_diff(m.L(), original.L()),
              1e-8);
    EXPECT_LE((m.residual_diag() - original.residual_diag())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-8);
    for (Flavor f : {Flavor::MLE, Flavor::VAR}) {
      EXPECT_NEAR(energy(m, f).value(), energy(original, f).value(), 1e-8);
    }
  }
}

TEST(Downdate, ToEmptyRestoresDiagonal) {
  Rng rng(20);
  const Matrix Kd = random_psd(7, rng);
  const KernelMatrix K = precomputed_matrix(Kd);
  FactoredModel m = build_on(K, 0.5, random_vector(7, rng), {4, 1, 6});
  for (int i = 0; i < 3; ++i) {
    m.downdate();
  }
  EXPECT_EQ(m.k(), 0);
  EXPECT_LE((m.residual_diag() - Kd.diagonal()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(m.downdate(), std::logic_error);
}

TEST(Downdate, AfterPermuteMatchesBuildWithoutThePoint) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    RandomInstance inst = random_instance(rng, 8, 64, 16);
    const KernelMatrix K = precomputed_matrix(inst.K);
    FactoredModel m = build_on(K, inst.sigma2, inst.y, inst.inducing);
    const Index victim =
        inst.inducing[uniform_below(rng, inst.inducing.size())];
    m.permute_to_end(victim);
    m.downdate();
    EXPECT_FALSE(m.contains(victim));
    expect_invariants(m, inst.K);
    expect_matches_rebuild(m, K, 1e-8);
  }
}

TEST(RoundTrip, RandomOperationSequencesMatchRebuild) {
  Rng rng(22);
  for (int trial = 0; trial < 25; ++trial) {
    RandomInstance inst = random_instance(rng, 10, 64, 12);
    const KernelMatrix K = precomputed_matrix(inst.K);
    FactoredModel m = build_on(K, inst.sigma2, inst.y, inst.inducing);
    for (int op = 0; op < 20; ++op) {
      const auto kind = uniform_below(rng, 3);
      if (kind == 0 || m.k() == 0) {
        const auto j = static_cast<Index>(uniform_below(rng, m.n()));
        if (auto ell = m.residual_column(K, j)) {
          m.append_pivot(j, *ell);
        }
      } else if (kind == 1) {
        m.permute_to_end(m.inducing()[uniform_below(rng, m.inducing().size())]);
      } else {
        m.downdate();
      }
      EXPECT_LE(m.qr_residual(), 1e-8);
      EXPECT_GE(m.residual_diag().minCoeff(),
                -1e-8 * inst.K.diagonal().maxCoeff());
    }
    const FactoredModel ref = build_on(K, inst.sigma2, inst.y, m.inducing());
    const Matrix a = m.L() * m.L().transpose();
    const Matrix b = ref.L() * ref.L().transpose();
    EXPECT_LE((a - b).norm(), 1e-7 * std::max(b.norm(), 1.0));
    for (Flavor f : {Flavor::MLE, Flavor::VAR}) {
      const EnergyTerms e = energy(m, f);
      const EnergyTerms r = energy(ref, f);
      EXPECT_NEAR(e.data, r.data, 1e-7);
      EXPECT_NEAR(e.complexity, r.complexity, 1e-7);
      EXPECT_NEAR(e.trace, r.trace, 1e-7);
    }
  }
}

TEST(RoundTrip, ThousandsOfSwapsKeepOrthogonality) {
  Rng rng(23);
  const Matrix Kd = random_psd(60, rng);
  const KernelMatrix K = precomputed_matrix(Kd);
  FactoredModel m = build_on(K, 0.05, random_vector(60, rng),
                             sample_without_replacement(60, 12, rng));
  for (int op = 0; op < 2000; ++op) {
    m.permute_to_end(m.inducing()[uniform_below(rng, m.inducing().size())]);
    m.downdate();
    for (;;) {
      const auto j = static_cast<Index>(uniform_below(rng, 60));
      if (auto ell = m.residual_column(K, j)) {
        if (m.append_pivot(j, *ell)) {
          break;
        }
      }
    }
  }
  EXPECT_LE(m.orthogonality_error(), 1e-8);
  EXPECT_LE(m.qr_residual(), 1e-8);
  expect_invariants(m, Kd);
}

TEST(Cost, SwapCycleScalesLinearlyInN) {
  // Append, permute and downdate per pivot at fixed k. Best of several
  // repetitions to keep scheduler noise out of the ratio.
  const Index k = 32;
  std::vector<double> times;
  for (Index n : {1000, 2000, 4000}) {
    Rng rng(24);
    auto kernel = std::make_shared<const RbfArdKernel>(1);
    const Matrix X = random_points(n, 1, rng, 5.0);
    Vector params(2);
    params << 0.0, std::log(16.0);
    const KernelMatrix K(kernel, X, params);
    FactoredModel m = build_on(K, 0.1, random_vector(n, rng),
                               sample_without_replacement(n, k, rng));
    double best = 1e300;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int cycle = 0; cycle < 8; ++cycle) {
        const Index victim = m.inducing().front();
        m.permute_to_end(victim);
        const Vector ell = m.downdate();
        m.append_pivot(victim, ell);
      }
      best = std::min(best, std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count());
    }
    times.push_back(best);
  }
  EXPECT_LE(times[1] / times[0], 2.6);
  EXPECT_LE(times[2] / times[1], 2.6);
}
