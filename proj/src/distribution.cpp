#include "emsm/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace emsm {

double check_loss(double tau, double y, double q) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("check_loss: tau outside [0,1]");
  const double d = y - q;
  return d >= 0.0 ? tau * d : (1.0 - tau) * (-d);
}

DiscreteDistribution::DiscreteDistribution(std::vector<double> support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (support_.empty()) throw std::invalid_argument("DiscreteDistribution: empty support");
  if (support_.size() != probs_.size())
    throw std::invalid_argument("DiscreteDistribution: support/probs size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (i > 0 && !(support_[i] > support_[i - 1]))
      throw std::invalid_argument("DiscreteDistribution: support must be strictly increasing");
    if (probs_[i] < 0.0) throw std::invalid_argument("DiscreteDistribution: negative probability");
    total += probs_[i];
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteDistribution: probabilities must sum to 1");
}

double DiscreteDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) m += support_[i] * probs_[i];
  return m;
}

double DiscreteDistribution::quantile(double tau) const {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("quantile: tau outside [0,1]");
  double cum = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    cum += probs_[i];
    if (cum >= tau - 1e-15) return support_[i];
  }
  return support_.back();
}

double DiscreteDistribution::quantile_loss(double tau, double q) const {
  double s = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i)
    s += probs_[i] * check_loss(tau, support_[i], q);
  return s;
}

double DiscreteDistribution::optimized_quantile_loss(double tau) const {
  return quantile_loss(tau, quantile(tau));
}

double DiscreteDistribution::prob_below(double q) const {
  double s = 0.0;
  for (std::size_t i = 0; i < support_.size() && support_[i] < q; ++i) s += probs_[i];
  return s;
}

double DiscreteDistribution::prob_above(double q) const {
  double s = 0.0;
  for (std::size_t i = support_.size(); i-- > 0 && support_[i] > q;) s += probs_[i];
  return s;
}

double DiscreteDistribution::prob_at(double q) const {
  for (std::size_t i = 0; i < support_.size(); ++i)
    if (support_[i] == q) return probs_[i];
  return 0.0;
}

double weighted_quantile(std::span<const double> y, std::span<const double> w, double tau) {
  if (y.size() != w.size() || y.empty())
    throw std::invalid_argument("weighted_quantile: bad inputs");
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  double total = 0.0;
  for (double wi : w) {
    if (wi < 0.0) throw std::invalid_argument("weighted_quantile: negative weight");
    total += wi;
  }
  if (total <= 0.0) throw std::invalid_argument("weighted_quantile: all weights zero");
  const double target = tau * total;
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum += w[order[k]];
    if (cum >= target - 1e-12 * total) {
      // Skip zero-weight duplicates so the left minimizer carries weight.
      if (w[order[k]] > 0.0 || cum > target + 1e-12 * total) return y[order[k]];
    }
  }
  return y[order.back()];
}

bool weighted_quantile_subgradient_ok(std::span<const double> y, std::span<const double> w,
                                      double tau, double q, double slack) {
  double total = 0.0, below = 0.0, at_or_below = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    total += w[i];
    if (y[i] < q) below += w[i];
    if (y[i] <= q) at_or_below += w[i];
  }
  const double t = tau * total;
  return below <= t + slack * total && t <= at_or_below + slack * total;
}

}  // namespace emsm
