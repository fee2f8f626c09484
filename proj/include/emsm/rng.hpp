#pragma once

#include <cstdint>
#include <vector>

#include "emsm/stats.hpp"

namespace emsm {

// Deterministic generator with platform-independent output streams.
// Replicate r of a run keyed by (seed, r) uses Rng(derive_seed(seed, r)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds decorrelate.
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  double normal() {
    // Inverse-CDF sampling keeps the stream portable.
    double u = uniform01();
    if (u <= 0.0) u = 0x1.0p-53;
    return normal_quantile(u);
  }

  // Index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

  // Sample from a discrete distribution given cumulative probabilities.
  std::size_t categorical(const std::vector<double>& cum) {
    const double u = uniform01();
    std::size_t i = 0;
    while (i + 1 < cum.size() && u >= cum[i]) ++i;
    return i;
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Cross-validation fold labels as a pure function of (seed, n, folds):
// a seeded Fisher-Yates shuffle of 0..n-1, folds assigned round-robin.
inline std::vector<int> fold_assignment(std::uint64_t seed, std::size_t n, int folds) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed(seed, 0xf01d5u));
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % folds);
  return fold;
}

}  // namespace emsm
