#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bliss {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

// Per-trial stream derived from (seed, trial); Monte Carlo trials may be
// partitioned across workers without changing results.
inline Rng make_trial_rng(std::uint64_t seed, std::uint64_t trial) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(trial + 1)));
}

// Uniform in [0, 1) with 53 random bits. Distributions are hand-rolled so
// output does not depend on the standard library implementation.
inline double uniform01(Rng& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n), rejection sampled.
inline std::int64_t uniform_below(Rng& g, std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("uniform_below: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return static_cast<std::int64_t>(x % un);
}

inline double normal01(Rng& g) {
  // Box-Muller; the second variate is discarded to keep the stream simple.
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& g) {
  for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(uniform_below(g, i + 1))]);
  }
}

// One draw from a categorical distribution given unnormalized weights.
inline std::size_t categorical_draw(std::span<const double> weights, double total, Rng& g) {
  const double u = uniform01(g) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace bliss
