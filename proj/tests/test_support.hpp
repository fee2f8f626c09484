#pragma once

#include <vector>

#include "emsm/distribution.hpp"
#include "emsm/rng.hpp"

namespace emsm::testing {

// Random discrete distribution with distinct support points and strictly
// positive probabilities.
inline DiscreteDistribution random_distribution(Rng& rng, int max_support = 10,
                                                bool grid_family = false) {
  const int k = 1 + static_cast<int>(rng.uniform01() * max_support) % max_support;
  std::vector<double> support;
  if (grid_family) {
    // Evenly spaced grid with a random origin and spacing.
    const double origin = rng.uniform(-2.0, 2.0);
    const double step = rng.uniform(0.05, 0.8);
    for (int i = 0; i < k; ++i) support.push_back(origin + step * i);
  } else {
    double v = rng.uniform(-3.0, 3.0);
    for (int i = 0; i < k; ++i) {
      support.push_back(v);
      v += rng.uniform(0.01, 1.5);
    }
  }
  std::vector<double> probs(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto& p : probs) {
    p = 0.05 + rng.uniform01();
    total += p;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    probs[i] /= total;
    acc += probs[i];
  }
  probs.back() = 1.0 - acc;
  return DiscreteDistribution(std::move(support), std::move(probs));
}

}  // namespace emsm::testing
