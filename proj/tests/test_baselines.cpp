#include "cholqr/baselines.hpp"
#include "cholqr/swap_select.hpp"
#include "support/dense_oracle.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace cholqr;
using namespace cholqr::testing;

namespace {

void expect_distinct_valid(const std::vector<Index> &I, Index n) {
  std::set<Index> seen(I.begin(), I.end());
  EXPECT_EQ(seen.size(), I.size());
  for (Index i : I) {
    EXPECT_GE(i, 0);
    EXPECT_LT(i, n);
  }
}

} // namespace

TEST(SelectRandom, FullSizeIsAPermutation) {
  Rng rng(91);
  std::vector<Index> I = select_random(20, 20, rng).indices;
  std::sort(I.begin(), I.end());
  for (Index i = 0; i < 20; ++i) {
    EXPECT_EQ(I[static_cast<std::size_t>(i)], i);
  }
}

TEST(SelectRandom, SeededDeterminism) {
  Rng a(92);
  Rng b(92);
  EXPECT_EQ(select_random(100, 10, a).indices, select_random(100, 10, b).indices);
  EXPECT_THROW(select_random(5, 6, a), ConfigError);
}

TEST(SelectRandom, DiscretePhaseNeverWorsensARandomInit) {
  Rng rng(93);
  for (int trial = 0; trial < 5; ++trial) {
    const RandomInstance inst = random_instance(rng, 40, 64, 10);
    const KernelMatrix K = precomputed_matrix(inst.K);
    const auto I = select_random(K.size(), 8, rng).indices;
    FactoredModel m = FactoredModel::build(K, inst.sigma2, inst.y, I, 8).model;
    const double F0 = energy(m, Flavor::VAR).value();
    InfoPivotSet ips = build_info_pivots(m, K, 8, rng);
    discrete_phase(m, ips, 8, K, Flavor::VAR, rng);
    EXPECT_LE(energy(m, Flavor::VAR).value(), F0 + 1e-9 * (1.0 + std::abs(F0)));
  }
}

TEST(GreedySubset, ExhaustiveCandidatesMatchBruteForceOrdering) {
  Rng rng(94);
  for (int trial = 0; trial < 5; ++trial) {
    const RandomInstance inst = random_instance(rng, 12, 20, 1);
    const Index n = inst.K.rows();
    const KernelMatrix K = precomputed_matrix(inst.K);
    for (Flavor f : {Flavor::MLE, Flavor::VAR}) {
      const Selection sel =
          select_greedy_subset(K, inst.sigma2, inst.y, 6, n, f, rng);
      ASSERT_EQ(sel.indices.size(), 6u);
      std::vector<Index> brute;
      double prev = dense_oracle_energy(inst.K, inst.sigma2, inst.y, {}, f).value();
      for (int step = 0; step < 6; ++step) {
        Index best = -1;
        double best_F = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j) {
          if (std::find(brute.begin(), brute.end(), j) != brute.end()) {
            continue;
          }
          std::vector<Index> grown = brute;
          grown.push_back(j);
          const double F =
              dense_oracle_energy(inst.K, inst.sigma2, inst.y, grown, f).value();
          if (F < best_F) {
            best_F = F;
            best = j;
          }
        }
        brute.push_back(best);
        // Only the free energy is a bound that tightens as points are added;
        // the projected-process likelihood can get worse.
        if (f == Flavor::VAR) {
          EXPECT_LE(best_F, prev + 1e-12);
        }
        prev = best_F;
      }
      EXPECT_EQ(sel.indices, brute);
    }
  }
}

TEST(GreedySubset, SmallCandidateSetsStillProduceValidSets) {
  Rng rng(95);
  const RandomInstance inst = random_instance(rng, 60, 60, 1);
  const KernelMatrix K = precomputed_matrix(inst.K);
  for (Index c : {1, 16, 512}) {
    const Selection sel =
        select_greedy_subset(K, inst.sigma2, inst.y, 10, c, Flavor::VAR, rng);
    EXPECT_EQ(sel.indices.size(), 10u);
    expect_distinct_valid(sel.indices, 60);
  }
  EXPECT_THROW(
      select_greedy_subset(K, inst.sigma2, inst.y, 10, 0, Flavor::VAR, rng),
      ConfigError);
}

TEST(GreedySubset, ReportsDegenerateCandidatesOnLowRankKernel) {
  Rng rng(96);
  Matrix G(20, 3);
  for (Index i = 0; i < 20; ++i) {
    for (Index t = 0; t < 3; ++t) {
      G(i, t) = standard_normal(rng);
    }
  }
  const KernelMatrix K = precomputed_matrix(G * G.transpose());
  const Selection sel = select_greedy_subset(K, 0.1, random_vector(20, rng), 6,
                                             20, Flavor::VAR, rng);
  EXPECT_EQ(sel.indices.size(), 3u);
  EXPECT_GT(sel.degenerate, 0);
}

TEST(EntropyGreedy, DominantVariancePointGoesFirst) {
  Rng rng(97);
  Matrix Kd = random_psd(10, rng);
  Kd(6, 6) += 50.0;
  const Selection sel =
      select_entropy_greedy(precomputed_matrix(Kd), 0.1, random_vector(10, rng), 4);
  ASSERT_FALSE(sel.indices.empty());
  EXPECT_EQ(sel.indices.front(), 6);
  expect_distinct_valid(sel.indices, 10);
}

TEST(EntropyGreedy, MatchesDenseGreedyVarianceOracle) {
  Rng rng(98);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix Kd = random_psd(30, rng);
    const Selection sel =
        select_entropy_greedy(precomputed_matrix(Kd), 0.1, random_vector(30, rng), 8);
    std::vector<Index> oracle;
    for (int step = 0; step < 8; ++step) {
      const Vector d = Kd.diagonal() - dense_nystrom(Kd, oracle).diagonal();
      Index best = 0;
      for (Index j = 1; j < 30; ++j) {
        if (d[j] > d[best]) {
          best = j;
        }
      }
      oracle.push_back(best);
    }
    EXPECT_EQ(sel.indices, oracle);
  }
}

TEST(EntropyGreedy, StopsOnExhaustedRank) {
  Matrix Kd = Matrix::Ones(5, 5);
  const Selection sel =
      select_entropy_greedy(precomputed_matrix(Kd), 0.1, Vector::Ones(5), 3);
  EXPECT_EQ(sel.indices.size(), 1u);
}

TEST(SelectorKind, ParseAliasesAndNames) {
  EXPECT_EQ(parse_selector("cholqr"), SelectorKind::CholQR);
  EXPECT_EQ(parse_selector("random"), SelectorKind::Random);
  EXPECT_EQ(parse_selector("titsias"), SelectorKind::GreedySubset);
  EXPECT_EQ(parse_selector("ivm"), SelectorKind::EntropyGreedy);
  EXPECT_EQ(to_string(SelectorKind::EntropyGreedy), "entropy");
  EXPECT_THROW(parse_selector("spgp"), ConfigError);
}
