#pragma once

#include <span>
#include <vector>

namespace emsm {

// Check function: tau*(y-q)_+ + (1-tau)*(q-y)_+.
double check_loss(double tau, double y, double q);

// Finite-support outcome distribution with strictly increasing support.
class DiscreteDistribution {
 public:
  DiscreteDistribution(std::vector<double> support, std::vector<double> probs);

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return support_.size(); }

  double mean() const;
  double min() const { return support_.front(); }
  double max() const { return support_.back(); }

  // Left (smallest) support point q with P(Y <= q) >= tau.
  double quantile(double tau) const;

  // E rho_tau(Y, q).
  double quantile_loss(double tau, double q) const;

  // min_q E rho_tau(Y, q), attained at quantile(tau).
  double optimized_quantile_loss(double tau) const;

  double prob_below(double q) const;   // P(Y < q)
  double prob_above(double q) const;   // P(Y > q)
  double prob_at(double q) const;      // P(Y = q)

 private:
  std::vector<double> support_;
  std::vector<double> probs_;
};

inline DiscreteDistribution bernoulli_dist(double p1) {
  if (p1 <= 0.0) return DiscreteDistribution({0.0}, {1.0});
  if (p1 >= 1.0) return DiscreteDistribution({1.0}, {1.0});
  return DiscreteDistribution({0.0, 1.0}, {1.0 - p1, p1});
}

// Left weighted tau-quantile of sample values: smallest y with
// (sum of weights at or below y) >= tau * (total weight).
double weighted_quantile(std::span<const double> y, std::span<const double> w, double tau);

// Discrete optimality of a weighted quantile: mass strictly below q
// is at most tau*total and mass at-or-below q is at least tau*total,
// up to `slack` in units of total weight.
bool weighted_quantile_subgradient_ok(std::span<const double> y, std::span<const double> w,
                                      double tau, double q, double slack = 1e-9);

}  // namespace emsm
