#pragma once

#include <limits>
#include <utility>

namespace emsm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class BoundSide { Upper, Lower };

// odds(x) = x/(1-x), with odds(1) = inf.
double odds(double x);

// Quantile level implied by the treatment sensitivity range:
// (lambda2-1)/(lambda2-lambda1), and 1/2 when lambda1 = lambda2 = 1.
double quantile_level(double lambda1, double lambda2);

// Outcome sensitivity specification. The mean shift of the outcome across
// confounder levels is restricted to [-delta1, delta2]; `Recommended`
// re-expresses the pair through a single shrinkage knob delta in [0,1]
// scaled by the optimized quantile losses.
struct OutcomeSpec {
  enum class Kind { MsmUnrestricted, ExplicitDeltas, Recommended };

  Kind kind = Kind::MsmUnrestricted;
  double delta1 = kInf;  // ExplicitDeltas
  double delta2 = kInf;
  double delta = 1.0;    // Recommended

  static OutcomeSpec msm() { return {}; }
  static OutcomeSpec explicit_deltas(double d1, double d2);
  static OutcomeSpec recommended(double delta);
};

struct SensitivityParams {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  OutcomeSpec outcome;

  SensitivityParams() = default;
  SensitivityParams(double l1, double l2, OutcomeSpec spec);

  // Symmetric range lambda1 = 1/lambda, lambda2 = lambda.
  static SensitivityParams symmetric(double lambda, OutcomeSpec spec);

  double tau() const { return quantile_level(lambda1, lambda2); }

  // Quantile level for the control-arm bounds, where the treatment labels
  // are flipped and the range becomes [1/lambda2, 1/lambda1].
  double tau_control() const;

  double lambda_gap() const { return lambda2 - lambda1; }
  // 1/lambda1 - 1/lambda2, the control-arm analogue of lambda_gap.
  double lambda_gap_control() const;
};

// Resolved outcome-shift limits (Delta1, Delta2) given the quantile level and
// the two optimized quantile losses of the relevant arm.
std::pair<double, double> recommended_deltas(double delta, double tau, double qloss_tau,
                                             double qloss_one_minus_tau);

std::pair<double, double> resolve_deltas(const OutcomeSpec& spec, double tau, double qloss_tau,
                                         double qloss_one_minus_tau);

// Shrinkage factors (psi_plus, psi_minus) in [0,1]. Ratios resolve 0/0 to 1
// and x/0 (x>0) to +inf before the final clip at 1.
std::pair<double, double> psi_factors(double delta1, double delta2, double tau, double qloss_tau,
                                      double qloss_one_minus_tau);

}  // namespace emsm
