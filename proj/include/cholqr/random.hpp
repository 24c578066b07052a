#ifndef CHOLQR_RANDOM_HPP_
#define CHOLQR_RANDOM_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace cholqr {

using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) from raw engine output, so sequences are
/// identical across standard library implementations.
inline std::uint64_t uniform_below(Rng &rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) {
    draw = rng();
  }
  return draw % bound;
}

inline double uniform_unit(Rng &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T> void shuffle_in_place(std::vector<T> &items, Rng &rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

/// m distinct values from [0, n) in random order.
inline std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n,
                                                            Eigen::Index m,
                                                            Rng &rng) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    all[static_cast<std::size_t>(i)] = i;
  }
  // Partial Fisher-Yates from the front.
  const auto take = static_cast<std::size_t>(std::min(m, n));
  for (std::size_t i = 0; i < take; ++i) {
    const auto j =
        i + static_cast<std::size_t>(uniform_below(rng, all.size() - i));
    std::swap(all[i], all[j]);
  }
  all.resize(take);
  return all;
}

/// Box-Muller standard normal.
inline double standard_normal(Rng &rng) {
  double u1 = uniform_unit(rng);
  while (u1 <= 0.0) {
    u1 = uniform_unit(rng);
  }
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace cholqr

#endif // CHOLQR_RANDOM_HPP_
