#include <utility>

#include "emsm/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emsm {

namespace {

double prod0(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " outside [0,1]");
}

}  // namespace

ArmSummary ArmSummary::from_distribution(const DiscreteDistribution& dist, double tau) {
  ArmSummary s;
  s.cond_mean = dist.mean();
  s.q_tau = dist.quantile(tau);
  s.q_one_minus_tau = dist.quantile(1.0 - tau);
  s.qloss_tau = dist.quantile_loss(tau, s.q_tau);
  s.qloss_one_minus_tau = dist.quantile_loss(1.0 - tau, s.q_one_minus_tau);
  return s;
}

void ArmSummary::validate(double tau) const {
  if (qloss_tau < 0.0 || qloss_one_minus_tau < 0.0)
    throw std::invalid_argument("ArmSummary: negative quantile loss");
  if (tau < 0.5 || tau >= 1.0) return;
  const double lo = (1.0 - tau) / tau;
  const double hi = tau / (1.0 - tau);
  const double ratio = (qloss_tau == 0.0 && qloss_one_minus_tau == 0.0)
                           ? 1.0
                           : qloss_one_minus_tau / qloss_tau;
  const double slack = 1e-9 * std::max(1.0, hi);
  if (!(ratio >= lo - slack && ratio <= hi + slack))
    throw std::invalid_argument("ArmSummary: quantile-loss ratio outside feasible range");
}

ConditionalSummary ConditionalSummary::from_distributions(const DiscreteDistribution& y_treated,
                                                          const DiscreteDistribution& y_control,
                                                          double propensity,
                                                          const SensitivityParams& params) {
  if (!(propensity > 0.0 && propensity < 1.0))
    throw std::invalid_argument("ConditionalSummary: propensity outside (0,1)");
  ConditionalSummary s;
  s.treated = ArmSummary::from_distribution(y_treated, params.tau());
  s.control = ArmSummary::from_distribution(y_control, params.tau_control());
  s.propensity = propensity;
  return s;
}

namespace {

BoundResult bounds_from_summary(double tau, double gap, const ArmSummary& arm,
                                const OutcomeSpec& spec, double mean_weight,
                                double nu_weight) {
  arm.validate(tau);
  const auto [d1, d2] = resolve_deltas(spec, tau, arm.qloss_tau, arm.qloss_one_minus_tau);
  const auto [psi_plus, psi_minus] =
      psi_factors(d1, d2, tau, arm.qloss_tau, arm.qloss_one_minus_tau);
  BoundResult r;
  r.tau = tau;
  r.psi_plus = psi_plus;
  r.psi_minus = psi_minus;
  r.nu_upper = arm.cond_mean + gap * psi_plus * arm.qloss_tau;
  r.nu_lower = arm.cond_mean - gap * psi_minus * arm.qloss_one_minus_tau;
  r.mu_upper = mean_weight * arm.cond_mean + nu_weight * r.nu_upper;
  r.mu_lower = mean_weight * arm.cond_mean + nu_weight * r.nu_lower;
  return r;
}

}  // namespace

std::pair<double, double> binary_quantile_losses(double tau, double p1) {
  if (!(tau >= 0.0 && tau <= 1.0 && p1 >= 0.0 && p1 <= 1.0))
    throw std::invalid_argument("binary_quantile_losses: arguments outside [0,1]");
  return {std::min((1.0 - tau) * (1.0 - p1), tau * p1),
          std::min((1.0 - tau) * p1, tau * (1.0 - p1))};
}

BoundResult emsm_conditional_bounds(const SensitivityParams& params,
                                    const ConditionalSummary& summary) {
  return bounds_from_summary(params.tau(), params.lambda_gap(), summary.treated, params.outcome,
                             summary.propensity, 1.0 - summary.propensity);
}

BoundResult emsm_conditional_bounds0(const SensitivityParams& params,
                                     const ConditionalSummary& summary) {
  if (params.lambda1 <= 0.0)
    throw std::invalid_argument("emsm_conditional_bounds0: lambda1 must be > 0");
  return bounds_from_summary(params.tau_control(), params.lambda_gap_control(), summary.control,
                             params.outcome, 1.0 - summary.propensity, summary.propensity);
}

namespace {

ArmSummary binary_arm_summary(double p, double tau) {
  ArmSummary s;
  const DiscreteDistribution d = bernoulli_dist(p);
  s = ArmSummary::from_distribution(d, tau);
  return s;
}

void assert_unit_interval(const BoundResult& r, const char* what) {
  const double tol = 1e-12;
  if (r.mu_upper > 1.0 + tol || r.mu_lower < -tol || r.nu_upper > 1.0 + tol ||
      r.nu_lower < -tol)
    throw std::logic_error(std::string(what) + ": sharp binary bound escaped [0,1]");
}

}  // namespace

BoundResult emsm_binary_bounds(double p1, double prob_t0, const SensitivityParams& params) {
  check_prob(p1, "emsm_binary_bounds: p1");
  check_prob(prob_t0, "emsm_binary_bounds: prob_t0");
  const ArmSummary arm = binary_arm_summary(p1, params.tau());
  BoundResult r = bounds_from_summary(params.tau(), params.lambda_gap(), arm, params.outcome,
                                      1.0 - prob_t0, prob_t0);
  assert_unit_interval(r, "emsm_binary_bounds");
  return r;
}

BoundResult emsm_binary_bounds0(double p0, double prob_t1, const SensitivityParams& params) {
  check_prob(p0, "emsm_binary_bounds0: p0");
  check_prob(prob_t1, "emsm_binary_bounds0: prob_t1");
  if (params.lambda1 <= 0.0)
    throw std::invalid_argument("emsm_binary_bounds0: lambda1 must be > 0");
  const ArmSummary arm = binary_arm_summary(p0, params.tau_control());
  BoundResult r = bounds_from_summary(params.tau_control(), params.lambda_gap_control(), arm,
                                      params.outcome, 1.0 - prob_t1, prob_t1);
  assert_unit_interval(r, "emsm_binary_bounds0");
  return r;
}

double dual_bound_at_q(const SensitivityParams& params, double q,
                       const DiscreteDistribution& y_treated) {
  const double tau = params.tau();
  const ArmSummary arm = ArmSummary::from_distribution(y_treated, tau);
  const auto [d1, d2] =
      resolve_deltas(params.outcome, tau, arm.qloss_tau, arm.qloss_one_minus_tau);
  const double loss_at_q = y_treated.quantile_loss(tau, q);
  const double inner =
      std::min({prod0(tau, d1), prod0(1.0 - tau, d2), loss_at_q});
  return arm.cond_mean + params.lambda_gap() * inner;
}

double relaxed_lower_bound_upper_spec(const SensitivityParams& params, const ArmSummary& treated) {
  if (params.outcome.kind != OutcomeSpec::Kind::Recommended)
    throw std::invalid_argument(
        "relaxed_lower_bound_upper_spec: needs the single-knob specification");
  const double tau = params.tau();
  if (tau <= 0.0 || tau >= 1.0) return treated.cond_mean;
  return treated.cond_mean -
         params.lambda_gap() * params.outcome.delta * (1.0 - tau) / tau * treated.qloss_tau;
}

WorstCaseConstruction worst_case_construction(const SensitivityParams& params,
                                              const DiscreteDistribution& y_treated) {
  const double tau = params.tau();
  const ArmSummary arm = ArmSummary::from_distribution(y_treated, tau);
  const auto [d1, d2] =
      resolve_deltas(params.outcome, tau, arm.qloss_tau, arm.qloss_one_minus_tau);
  const auto [psi_plus, psi_minus] =
      psi_factors(d1, d2, tau, arm.qloss_tau, arm.qloss_one_minus_tau);
  (void)psi_minus;

  WorstCaseConstruction w;
  w.tau = tau;
  w.psi_plus = psi_plus;
  w.q_star = arm.q_tau;
  w.u1_prob_t1 = 1.0 - tau;
  w.lambda_u0 = params.lambda1;
  w.lambda_u1 = params.lambda2;
  w.support = y_treated.support();

  const std::size_t k = w.support.size();
  // Degenerate splits: a single support point, or a one-sided quantile level.
  if (k == 1 || tau == 0.0 || tau == 1.0) {
    w.probs_u1 = y_treated.probs();
    w.probs_u0 = y_treated.probs();
    w.eta_u1 = arm.cond_mean;
    w.eta_u0 = arm.cond_mean;
    w.attained_bound = arm.cond_mean;
    return w;
  }

  const double p_above = y_treated.prob_above(w.q_star);
  const double p_below = y_treated.prob_below(w.q_star);
  const double mult_keep = 1.0 - psi_plus;
  const double mult_up = 1.0 + tau / (1.0 - tau) * psi_plus;
  const double mult_down = 1.0 + (1.0 - tau) / tau * psi_plus;

  w.probs_u1.resize(k);
  w.probs_u0.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double y = w.support[i];
    const double p = y_treated.probs()[i];
    if (y > w.q_star) {
      w.probs_u1[i] = mult_up * p;
      w.probs_u0[i] = mult_keep * p;
    } else if (y < w.q_star) {
      w.probs_u1[i] = mult_keep * p;
      w.probs_u0[i] = mult_down * p;
    } else {
      w.probs_u1[i] = mult_keep * p + psi_plus * (1.0 - p_above / (1.0 - tau));
      w.probs_u0[i] = mult_keep * p + psi_plus * (1.0 - p_below / tau);
    }
  }

  w.eta_u1 = 0.0;
  w.eta_u0 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w.eta_u1 += w.support[i] * w.probs_u1[i];
    w.eta_u0 += w.support[i] * w.probs_u0[i];
  }
  w.attained_bound = w.eta_u1 * w.lambda_u1 * (1.0 - tau) + w.eta_u0 * w.lambda_u0 * tau;
  return w;
}

PopulationBounds aggregate_mu(std::span<const StratumBounds> strata) {
  if (strata.empty()) throw std::invalid_argument("aggregate_mu: no strata");
  double total = 0.0;
  for (const auto& s : strata) total += s.weight;
  if (std::fabs(total - 1.0) > 1e-10)
    throw std::invalid_argument("aggregate_mu: stratum weights must sum to 1");
  PopulationBounds b;
  for (const auto& s : strata) {
    const double pi = s.propensity;
    b.mu1_upper += s.weight * (pi * s.mean_treated + (1.0 - pi) * s.nu1_upper);
    b.mu1_lower += s.weight * (pi * s.mean_treated + (1.0 - pi) * s.nu1_lower);
    b.mu0_upper += s.weight * ((1.0 - pi) * s.mean_control + pi * s.nu0_upper);
    b.mu0_lower += s.weight * ((1.0 - pi) * s.mean_control + pi * s.nu0_lower);
  }
  b.ate_upper = b.mu1_upper - b.mu0_lower;
  b.ate_lower = b.mu1_lower - b.mu0_upper;
  return b;
}

}  // namespace emsm
