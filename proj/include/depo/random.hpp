#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace depo {

/// Engine used everywhere; 64-bit Mersenne twister so runs are reproducible given a seed.
using Rng = std::mt19937_64;

/// Derive an independent stream from a base seed and a stream tag (splitmix64 mixing).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform01(Rng& rng) {
  // 53 random bits; independent of the standard library's distribution implementation.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Box-Muller; one draw per call so the stream position is easy to reason about.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = standard_normal(rng);
  return out;
}

/// Sample an index from a discrete distribution given as nonnegative weights summing to ~1.
template <class Weights>
std::size_t sample_categorical(Rng& rng, const Weights& probs) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const auto n = static_cast<std::size_t>(probs.size());
  for (std::size_t i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Round-off: fall back to the last index with positive mass.
  for (std::size_t i = n; i-- > 0;)
    if (probs[i] > 0.0) return i;
  return n - 1;
}

}  // namespace depo
