#include "emsm/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

namespace emsm {

double odds(double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("odds: argument outside [0,1]");
  if (x == 1.0) return kInf;
  return x / (1.0 - x);
}

double quantile_level(double lambda1, double lambda2) {
  if (lambda1 == 1.0 && lambda2 == 1.0) return 0.5;
  return (lambda2 - 1.0) / (lambda2 - lambda1);
}

OutcomeSpec OutcomeSpec::explicit_deltas(double d1, double d2) {
  if (d1 < 0.0 || d2 < 0.0 || std::isnan(d1) || std::isnan(d2))
    throw std::invalid_argument("OutcomeSpec: Delta bounds must be >= 0");
  OutcomeSpec s;
  s.kind = Kind::ExplicitDeltas;
  s.delta1 = d1;
  s.delta2 = d2;
  return s;
}

OutcomeSpec OutcomeSpec::recommended(double delta) {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("OutcomeSpec: delta must be in [0,1]");
  OutcomeSpec s;
  s.kind = Kind::Recommended;
  s.delta = delta;
  return s;
}

SensitivityParams::SensitivityParams(double l1, double l2, OutcomeSpec spec)
    : lambda1(l1), lambda2(l2), outcome(spec) {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0 && lambda2 >= 1.0))
    throw std::invalid_argument("SensitivityParams: need 0 <= lambda1 <= 1 <= lambda2");
  if (std::isnan(lambda1) || std::isnan(lambda2) || std::isinf(lambda2))
    throw std::invalid_argument("SensitivityParams: lambda range must be finite");
}

SensitivityParams SensitivityParams::symmetric(double lambda, OutcomeSpec spec) {
  if (!(lambda >= 1.0)) throw std::invalid_argument("SensitivityParams: lambda must be >= 1");
  return SensitivityParams(1.0 / lambda, lambda, spec);
}

double SensitivityParams::tau_control() const {
  if (lambda1 == 1.0 && lambda2 == 1.0) return 0.5;
  if (lambda1 == 0.0) return 1.0;
  return quantile_level(1.0 / lambda2, 1.0 / lambda1);
}

double SensitivityParams::lambda_gap_control() const {
  if (lambda1 == 0.0) return kInf;
  return 1.0 / lambda1 - 1.0 / lambda2;
}

std::pair<double, double> recommended_deltas(double delta, double tau, double qloss_tau,
                                             double qloss_one_minus_tau) {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("recommended_deltas: delta outside [0,1]");
  if (tau >= 0.5) {
    const double scale = (tau == 1.0) ? kInf : delta / (1.0 - tau);
    return {scale * qloss_one_minus_tau, scale * qloss_tau};
  }
  const double scale = (tau == 0.0) ? kInf : delta / tau;
  return {scale * qloss_tau, scale * qloss_one_minus_tau};
}

std::pair<double, double> resolve_deltas(const OutcomeSpec& spec, double tau, double qloss_tau,
                                         double qloss_one_minus_tau) {
  switch (spec.kind) {
    case OutcomeSpec::Kind::MsmUnrestricted:
      return {kInf, kInf};
    case OutcomeSpec::Kind::ExplicitDeltas:
      return {spec.delta1, spec.delta2};
    case OutcomeSpec::Kind::Recommended:
      return recommended_deltas(spec.delta, tau, qloss_tau, qloss_one_minus_tau);
  }
  throw std::logic_error("resolve_deltas: unreachable");
}

namespace {

// a/b with the conventions 0/0 = 1 and x/0 = inf for x > 0.
double ratio_or_one(double a, double b) {
  if (b > 0.0) return a / b;
  return a == 0.0 ? 1.0 : kInf;
}

// Product with 0 * inf treated as 0 (the factor of an empty confounder side).
double prod0(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

}  // namespace

std::pair<double, double> psi_factors(double delta1, double delta2, double tau, double qloss_tau,
                                      double qloss_one_minus_tau) {
  if (delta1 < 0.0 || delta2 < 0.0)
    throw std::invalid_argument("psi_factors: Delta bounds must be >= 0");
  const double psi_plus = std::min(
      {ratio_or_one(prod0(tau, delta1), qloss_tau),
       ratio_or_one(prod0(1.0 - tau, delta2), qloss_tau), 1.0});
  const double psi_minus = std::min(
      {ratio_or_one(prod0(1.0 - tau, delta1), qloss_one_minus_tau),
       ratio_or_one(prod0(tau, delta2), qloss_one_minus_tau), 1.0});
  return {psi_plus, psi_minus};
}

}  // namespace emsm
