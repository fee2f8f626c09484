#include "emsm/dv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace emsm {

namespace {

double prod0(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

// c * (theta - 1) * p / (a + b*theta), with the theta = inf limit c*p/b.
double theta_ratio_term(double c, double theta, double p, double a, double b) {
  const double num = prod0(c, p);
  if (num == 0.0 || std::isinf(a)) return 0.0;
  if (std::isinf(theta)) {
    if (b == 0.0) return kInf;
    return num / b;
  }
  return num * (theta - 1.0) / (a + b * theta);
}

}  // namespace

DvParams::DvParams(double theta_, double l1, double l2) : theta(theta_), lambda1(l1), lambda2(l2) {
  if (!(theta >= 1.0)) throw std::invalid_argument("DvParams: theta must be >= 1");
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0 && lambda2 >= 1.0) || std::isinf(lambda2))
    throw std::invalid_argument("DvParams: need 0 <= lambda1 <= 1 <= lambda2 < inf");
}

DvParams DvParams::symmetric(double theta_, double lambda) {
  return DvParams(theta_, 1.0 / lambda, lambda);
}

double DvParams::tau_control() const {
  return SensitivityParams(lambda1, lambda2, OutcomeSpec::msm()).tau_control();
}

BinaryStratum::BinaryStratum(double p1_, double p0_, double prob_t1_)
    : p1(p1_), p0(p0_), prob_t1(prob_t1_) {
  if (!(p1 >= 0.0 && p1 <= 1.0 && p0 >= 0.0 && p0 <= 1.0))
    throw std::invalid_argument("BinaryStratum: outcome probabilities outside [0,1]");
  if (!(prob_t1 > 0.0 && prob_t1 < 1.0))
    throw std::invalid_argument("BinaryStratum: prob_t1 outside (0,1)");
}

double bounding_factor(double x, double y) {
  if (!(x >= 1.0 && y >= 1.0)) throw std::invalid_argument("bounding_factor: arguments below 1");
  if (std::isinf(x)) return y;
  if (std::isinf(y)) return x;
  return x * y / (x + y - 1.0);
}

namespace {

double inv_lambda1(const DvParams& params) {
  return params.lambda1 == 0.0 ? kInf : 1.0 / params.lambda1;
}

CrrInterval crr_from_mu(double mu1_upper, double mu1_lower, double mu0_upper, double mu0_lower) {
  CrrInterval c;
  auto ratio = [&](double num, double den, double* out) {
    if (num == 0.0 && den == 0.0) {
      c.defined = false;
      return;
    }
    *out = (den == 0.0) ? kInf : num / den;
  };
  ratio(mu1_upper, mu0_lower, &c.upper);
  ratio(mu1_lower, mu0_upper, &c.lower);
  return c;
}

}  // namespace

DvBounds dv_original_bounds(const BinaryStratum& stratum, const DvParams& params) {
  if (stratum.p0 == 0.0)
    throw std::invalid_argument("dv_original_bounds: p0 = 0 leaves the risk ratio undefined");
  const double pt1 = stratum.prob_t1;
  const double pt0 = 1.0 - pt1;
  const double b2 = bounding_factor(params.lambda2, params.theta);
  const double b1 = bounding_factor(inv_lambda1(params), params.theta);
  DvBounds r;
  r.mu1_upper = stratum.p1 * (pt1 + pt0 * b2);
  r.mu1_lower = stratum.p1 * (pt1 + pt0 / b1);
  r.mu0_upper = stratum.p0 * (pt0 + pt1 * b1);
  r.mu0_lower = stratum.p0 * (pt0 + pt1 / b2);
  r.crr.upper = stratum.orr() * b2;
  r.crr.lower = stratum.orr() / b1;
  return r;
}

DvBounds sjolander_bounds(const BinaryStratum& stratum, const DvParams& params) {
  if (stratum.p0 == 0.0)
    throw std::invalid_argument("sjolander_bounds: p0 = 0 leaves the risk ratio undefined");
  const double pt1 = stratum.prob_t1;
  const double pt0 = 1.0 - pt1;
  const double b2 = bounding_factor(params.lambda2, params.theta);
  const double b1 = bounding_factor(inv_lambda1(params), params.theta);
  const double cap1 = stratum.p1 > 0.0 ? 1.0 / stratum.p1 : kInf;
  const double cap0 = 1.0 / stratum.p0;
  DvBounds r;
  r.mu1_upper = stratum.p1 * (pt1 + pt0 * std::min(b2, cap1));
  r.mu1_lower = stratum.p1 * (pt1 + pt0 / b1);
  r.mu0_upper = stratum.p0 * (pt0 + pt1 * std::min(b1, cap0));
  r.mu0_lower = stratum.p0 * (pt0 + pt1 / b2);
  r.crr.upper = stratum.orr() * (pt1 + pt0 * std::min(b2, cap1)) / (pt1 / b2 + pt0);
  r.crr.lower = stratum.orr() * (pt1 + pt0 / b1) / (pt1 * std::min(b1, cap0) + pt0);
  return r;
}

DvSharpBounds dv_sharp_bounds(const BinaryStratum& stratum, const DvParams& params) {
  const double theta = params.theta;
  const double tau = params.tau();
  const double tau_c = params.tau_control();
  const double gap = params.lambda2 - params.lambda1;
  const double pt1 = stratum.prob_t1;
  const double pt0 = 1.0 - pt1;
  const double p1 = stratum.p1;
  const double p0 = stratum.p0;

  const auto [loss1_tau, loss1_1mtau] = binary_quantile_losses(tau, p1);

  DvSharpBounds r;
  const double up1 = theta_ratio_term(tau, theta, p1, odds(tau), 1.0);
  r.mu1_upper = p1 + pt0 * gap * std::min(up1, loss1_tau);
  const double lo1 = theta_ratio_term(1.0 - tau, theta, p1, odds(1.0 - tau), 1.0);
  r.mu1_lower = p1 - pt0 * gap * std::min(lo1, loss1_1mtau);

  // Control-arm pieces in a form that stays finite as lambda1 -> 0:
  // the multiplier (1/lambda1 - 1/lambda2) times each min argument is
  // rewritten with tau' = lambda2*(1-tau) and 1-tau' = lambda1*tau.
  const double tt = tau * (1.0 - tau);
  const double a_up = theta_ratio_term(gap * tt, theta, p0, tau_c, 1.0 - tau_c);
  const double c_1mtauc = params.lambda2 > 0.0 ? gap * tau / params.lambda2 : 0.0;
  const double c_tauc =
      params.lambda1 > 0.0 ? gap * (1.0 - tau) / params.lambda1 : kInf;
  const double b_up = std::min(prod0(c_1mtauc, 1.0 - p0), prod0(c_tauc, p0));
  r.mu0_upper = p0 + pt1 * std::min(a_up, b_up);

  const double a_lo = theta_ratio_term(gap * tt, theta, p0, 1.0 - tau_c, tau_c);
  const double b_lo = std::min(prod0(c_1mtauc, p0), prod0(c_tauc, 1.0 - p0));
  r.mu0_lower = p0 - pt1 * std::min(a_lo, b_lo);

  r.crr = crr_from_mu(r.mu1_upper, r.mu1_lower, r.mu0_upper, r.mu0_lower);

  r.delta1_upper = theta_ratio_term(1.0, theta, p1, odds(tau), 1.0);
  r.delta2_upper = theta_ratio_term(1.0, theta, p1, 1.0, odds(1.0 - tau));
  r.delta1_lower = theta_ratio_term(1.0, theta, p1, odds(1.0 - tau), 1.0);
  r.delta2_lower = theta_ratio_term(1.0, theta, p1, 1.0, odds(tau));
  return r;
}

CrrInterval dv_relaxed_crr_bounds(const BinaryStratum& stratum, const DvParams& params) {
  if (params.lambda1 <= 0.0 || std::fabs(params.lambda1 * params.lambda2 - 1.0) > 1e-12)
    throw std::invalid_argument("dv_relaxed_crr_bounds: needs lambda1 = 1/lambda2");
  if (stratum.p0 == 0.0)
    throw std::invalid_argument("dv_relaxed_crr_bounds: p0 = 0 leaves the ratio undefined");
  const double lam = params.lambda2;
  const double factor = std::isinf(params.theta)
                            ? lam
                            : (lam * params.theta + 1.0) / (lam + params.theta);
  CrrInterval c;
  c.upper = stratum.orr() * factor;
  c.lower = stratum.orr() / factor;
  return c;
}

double theta_from_delta(double delta, double tau, double p1, BoundSide side) {
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("theta_from_delta: delta must be in [0,1)");
  const double level = side == BoundSide::Upper ? tau : 1.0 - tau;
  const double m = std::min(odds(level), odds(1.0 - p1));
  if (std::isinf(m)) return kInf;
  const double num = 1.0 + delta * m;
  const double den = 1.0 - delta * odds(1.0 - level) * m;
  if (den <= 0.0) return kInf;
  return num / den;
}

std::pair<double, double> theta_plus_minus(double delta, double tau) {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("theta_plus_minus: delta outside [0,1]");
  auto envelope = [&](double level) {
    if (delta == 1.0) return kInf;
    const double o = odds(level);
    if (std::isinf(o)) return kInf;
    return (1.0 + delta * o) / (1.0 - delta);
  };
  return {envelope(tau), envelope(1.0 - tau)};
}

std::vector<double> aligned_theta_grid(double delta, double tau) {
  const double theta_plus = theta_plus_minus(delta, tau).first;
  std::vector<double> grid;
  for (double factor : {0.5, 1.0, 1.5}) {
    const double theta = std::isinf(theta_plus) ? kInf : factor * theta_plus;
    if (theta >= 1.0) grid.push_back(theta);
  }
  return grid;
}

namespace {

BoundResult min_form_bounds(double inner_up, double inner_lo, const ArmSummary& arm, double tau,
                            double gap, double propensity) {
  BoundResult r;
  r.tau = tau;
  const double up = std::min(inner_up, arm.qloss_tau);
  const double lo = std::min(inner_lo, arm.qloss_one_minus_tau);
  r.psi_plus = arm.qloss_tau > 0.0 ? up / arm.qloss_tau : 1.0;
  r.psi_minus = arm.qloss_one_minus_tau > 0.0 ? lo / arm.qloss_one_minus_tau : 1.0;
  r.nu_upper = arm.cond_mean + gap * up;
  r.nu_lower = arm.cond_mean - gap * lo;
  r.mu_upper = propensity * arm.cond_mean + (1.0 - propensity) * r.nu_upper;
  r.mu_lower = propensity * arm.cond_mean + (1.0 - propensity) * r.nu_lower;
  return r;
}

}  // namespace

BoundResult dmsm_bounds(double delta_total, const ArmSummary& treated, double propensity,
                        const SensitivityParams& lambdas) {
  if (delta_total < 0.0) throw std::invalid_argument("dmsm_bounds: delta_total must be >= 0");
  const double tau = lambdas.tau();
  const double inner = prod0(tau * (1.0 - tau), delta_total);
  return min_form_bounds(inner, inner, treated, tau, lambdas.lambda_gap(), propensity);
}

BoundResult rmsm_bounds(double theta, const ArmSummary& treated, double propensity,
                        const SensitivityParams& lambdas) {
  if (!(theta >= 1.0)) throw std::invalid_argument("rmsm_bounds: theta must be >= 1");
  if (treated.cond_mean < 0.0)
    throw std::invalid_argument("rmsm_bounds: requires a nonnegative outcome mean");
  const double tau = lambdas.tau();
  double inner_up, inner_lo;
  if (std::isinf(theta)) {
    inner_up = prod0(treated.cond_mean, tau);
    inner_lo = prod0(treated.cond_mean, 1.0 - tau);
  } else {
    inner_up = tau == 0.0 || tau == 1.0
                   ? 0.0
                   : treated.cond_mean * (theta - 1.0) / (1.0 / (1.0 - tau) + theta / tau);
    inner_lo = tau == 0.0 || tau == 1.0
                   ? 0.0
                   : treated.cond_mean * (theta - 1.0) / (theta / (1.0 - tau) + 1.0 / tau);
  }
  return min_form_bounds(inner_up, inner_lo, treated, tau, lambdas.lambda_gap(), propensity);
}

}  // namespace emsm
