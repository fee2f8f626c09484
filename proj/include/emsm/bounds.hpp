#pragma once

#include <utility>
#include <span>
#include <vector>

#include "emsm/distribution.hpp"
#include "emsm/sensitivity.hpp"

namespace emsm {

// Per-arm conditional summary at quantile level tau: mean, the tau- and
// (1-tau)-quantiles, and the two optimized quantile losses.
struct ArmSummary {
  double cond_mean = 0.0;
  double q_tau = 0.0;
  double q_one_minus_tau = 0.0;
  double qloss_tau = 0.0;
  double qloss_one_minus_tau = 0.0;

  static ArmSummary from_distribution(const DiscreteDistribution& dist, double tau);

  // Nonnegative losses; for tau >= 1/2 the loss ratio obeys
  // (1-tau)/tau <= qloss_one_minus_tau/qloss_tau <= tau/(1-tau), 0/0 := 1.
  void validate(double tau) const;
};

// Covariate-stratum summary: treated block at level tau, control block at
// level tau', and the propensity P(T=1|X).
struct ConditionalSummary {
  ArmSummary treated;
  ArmSummary control;
  double propensity = 0.5;

  static ConditionalSummary from_distributions(const DiscreteDistribution& y_treated,
                                               const DiscreteDistribution& y_control,
                                               double propensity,
                                               const SensitivityParams& params);
};

struct BoundResult {
  double nu_upper = 0.0;
  double nu_lower = 0.0;
  double mu_upper = 0.0;
  double mu_lower = 0.0;
  double psi_plus = 1.0;
  double psi_minus = 1.0;
  double tau = 0.5;
};

// Sharp conditional and stratum-level bounds for the treated-arm mean
// E(Y^1 | T=0, X) and E(Y^1) contribution of one stratum.
BoundResult emsm_conditional_bounds(const SensitivityParams& params,
                                    const ConditionalSummary& summary);

// Control-arm analogue for E(Y^0 | T=1, X); requires lambda1 > 0.
BoundResult emsm_conditional_bounds0(const SensitivityParams& params,
                                     const ConditionalSummary& summary);

// Optimized binary quantile losses at level tau for P(Y=1)=p1:
// (loss at tau, loss at 1-tau).
std::pair<double, double> binary_quantile_losses(double tau, double p1);

// Closed-form single-stratum bounds for a binary outcome with P(Y=1|T=1)=p1.
BoundResult emsm_binary_bounds(double p1, double prob_t0, const SensitivityParams& params);

// Control-arm analogue with P(Y=1|T=0)=p0; requires lambda1 > 0.
BoundResult emsm_binary_bounds0(double p0, double prob_t1, const SensitivityParams& params);

// Upper bound evaluated at an arbitrary threshold q in place of the
// tau-quantile; minimized over q at the tau-quantile.
double dual_bound_at_q(const SensitivityParams& params, double q,
                       const DiscreteDistribution& y_treated);

// Relaxed lower bound under the upper-side single-knob specification.
// Diagnostic only: it does not recover the unrestricted lower bound at
// delta = 1.
double relaxed_lower_bound_upper_spec(const SensitivityParams& params,
                                      const ArmSummary& treated);

// Binary-confounder distribution attaining the sharp upper bound: the
// observed treated-arm law re-mixed into two conditional laws split at the
// tau-quantile.
struct WorstCaseConstruction {
  double tau = 0.5;
  double psi_plus = 1.0;
  double q_star = 0.0;
  double u1_prob_t1 = 0.5;   // Q(U=1 | T=1)
  double lambda_u0 = 1.0;    // density ratio at U=0
  double lambda_u1 = 1.0;    // density ratio at U=1
  std::vector<double> support;
  std::vector<double> probs_u1;
  std::vector<double> probs_u0;
  double eta_u1 = 0.0;       // E(Y^1 | U=1)
  double eta_u0 = 0.0;
  double attained_bound = 0.0;
};

WorstCaseConstruction worst_case_construction(const SensitivityParams& params,
                                              const DiscreteDistribution& y_treated);

// One covariate stratum prepared for aggregation.
struct StratumBounds {
  double weight = 1.0;
  double propensity = 0.5;
  double mean_treated = 0.0;
  double mean_control = 0.0;
  double nu1_upper = 0.0;
  double nu1_lower = 0.0;
  double nu0_upper = 0.0;
  double nu0_lower = 0.0;
};

struct PopulationBounds {
  double mu1_upper = 0.0;
  double mu1_lower = 0.0;
  double mu0_upper = 0.0;
  double mu0_lower = 0.0;
  double ate_upper = 0.0;
  double ate_lower = 0.0;
};

// mu1 = E{TY + (1-T) nu1(X)}, mu0 = E{(1-T)Y + T nu0(X)}; the treatment
// effect bounds contrast per-arm bounds, which are simultaneously attained.
PopulationBounds aggregate_mu(std::span<const StratumBounds> strata);

}  // namespace emsm
