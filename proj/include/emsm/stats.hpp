#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace emsm {

// Quantile of the standard normal distribution at probability p in (0,1).
// Rational approximation (Wichura's algorithm), absolute error below 1e-13.
double normal_quantile(double p);

// Standard normal CDF.
double normal_cdf(double x);

double mean(std::span<const double> v);

// Population variance, mean((v - mean)^2).
double variance(std::span<const double> v);

// Empirical quantile with linear interpolation between order statistics.
// `sorted` must be ascending; p in [0,1].
double sorted_quantile(std::span<const double> sorted, double p);

// FNV-1a over a byte string, for reproducibility stamps.
std::uint64_t fnv1a_hash(std::span<const char> bytes);

}  // namespace emsm
