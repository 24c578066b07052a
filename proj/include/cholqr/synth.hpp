#ifndef CHOLQR_SYNTH_HPP_
#define CHOLQR_SYNTH_HPP_

#include "cholqr/kernels.hpp"
#include "cholqr/random.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace cholqr::synth {

// Seeded regression sets for tests and benchmarks. None of these claim to
// reproduce a published dataset.

/// 1D inputs uniform on [0, 10], y = sin(x) + 0.4 sin(3x) + N(0, 0.2^2).
inline Dataset sine_1d(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.inputs.resize(n, 1);
  d.targets.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = 10.0 * uniform_unit(rng);
    d.inputs(i, 0) = x;
    d.targets[i] =
        std::sin(x) + 0.4 * std::sin(3.0 * x) + 0.2 * standard_normal(rng);
  }
  return d;
}

/// Smooth nonlinear function of 8 inputs on [-1, 1]^8 with unequal
/// relevance per dimension, plus N(0, 0.1^2) noise.
inline Dataset smooth_8d(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.inputs.resize(n, 8);
  d.targets.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < 8; ++t) {
      d.inputs(i, t) = 2.0 * uniform_unit(rng) - 1.0;
    }
    const auto x = d.inputs.row(i);
    d.targets[i] = std::sin(2.0 * x[0]) * std::cos(x[1]) + 0.5 * x[2] * x[3] +
                   std::tanh(2.0 * x[4]) +
                   0.3 * (x[5] * x[5] + x[6] * x[6] + x[7] * x[7]) +
                   0.1 * standard_normal(rng);
  }
  return d;
}

/// `groups` channel groups of `bins_per_group` bins, each normalized to sum
/// to one. The target depends on where each group's mass sits.
inline Dataset histograms(Index n, Index groups, Index bins_per_group,
                          std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  const Index bins = groups * bins_per_group;
  d.inputs.resize(n, bins);
  d.targets.resize(n);
  for (Index i = 0; i < n; ++i) {
    double y = 0.0;
    for (Index g = 0; g < groups; ++g) {
      const double centre = uniform_unit(rng) * static_cast<double>(bins_per_group);
      double total = 0.0;
      for (Index u = 0; u < bins_per_group; ++u) {
        const double dist = static_cast<double>(u) + 0.5 - centre;
        const double v = std::exp(-0.5 * dist * dist) + 0.05 * uniform_unit(rng);
        d.inputs(i, g * bins_per_group + u) = v;
        total += v;
      }
      d.inputs.row(i).segment(g * bins_per_group, bins_per_group) /= total;
      y += std::sin(std::numbers::pi * static_cast<double>(g + 1) * centre /
                    static_cast<double>(bins_per_group));
    }
    d.targets[i] = y + 0.1 * standard_normal(rng);
  }
  return d;
}

inline std::vector<ChannelGroup> histogram_groups(Index groups,
                                                  Index bins_per_group) {
  std::vector<ChannelGroup> out;
  for (Index g = 0; g < groups; ++g) {
    out.push_back({g * bins_per_group, (g + 1) * bins_per_group});
  }
  return out;
}

/// Rows 0, k, 2k, ...
inline Dataset every_kth(const Dataset &d, Index k) {
  if (k < 1) {
    throw ConfigError("every_kth: stride must be positive");
  }
  std::vector<Index> rows;
  for (Index i = 0; i < d.size(); i += k) {
    rows.push_back(i);
  }
  return d.subset(rows);
}

/// Random split into `n_train` training rows and the rest for testing.
struct Split {
  Dataset train;
  Dataset test;
};

inline Split random_split(const Dataset &d, Index n_train, Rng &rng) {
  if (n_train < 1 || n_train >= d.size()) {
    throw ConfigError("random_split: n_train must be in [1, n)");
  }
  std::vector<Index> order = sample_without_replacement(d.size(), d.size(), rng);
  std::vector<Index> a(order.begin(), order.begin() + n_train);
  std::vector<Index> b(order.begin() + n_train, order.end());
  return {d.subset(a), d.subset(b)};
}

} // namespace cholqr::synth

#endif // CHOLQR_SYNTH_HPP_
