#pragma once

#include <utility>
#include <vector>

#include "emsm/bounds.hpp"
#include "emsm/sensitivity.hpp"

namespace emsm {

// Sensitivity parameters for the relative-risk style outcome constraint:
// theta >= 1 bounds the ratio of conditional outcome means across
// confounder levels, on top of the usual treatment range.
struct DvParams {
  double theta = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;

  DvParams(double theta_, double l1, double l2);
  static DvParams symmetric(double theta_, double lambda);

  double tau() const { return quantile_level(lambda1, lambda2); }
  double tau_control() const;
};

// Single binary-outcome stratum.
struct BinaryStratum {
  double p1 = 0.5;       // E(Y | T=1)
  double p0 = 0.5;       // E(Y | T=0)
  double prob_t1 = 0.5;  // P(T=1)

  BinaryStratum(double p1_, double p0_, double prob_t1_);
  double orr() const { return p1 / p0; }
};

// B(x,y) = xy/(x+y-1) for x,y >= 1; B(inf,y) = y.
double bounding_factor(double x, double y);

struct CrrInterval {
  double lower = 1.0;
  double upper = 1.0;
  bool defined = true;  // false when the ratio degenerates to 0/0
};

struct DvBounds {
  double mu1_upper = 0.0;
  double mu1_lower = 0.0;
  double mu0_upper = 0.0;
  double mu0_lower = 0.0;
  CrrInterval crr;
};

// Original bounding-factor bounds; the upper bounds may exceed 1.
DvBounds dv_original_bounds(const BinaryStratum& stratum, const DvParams& params);

// Bounding-factor bounds with the min{B, 1/p} improvement.
DvBounds sjolander_bounds(const BinaryStratum& stratum, const DvParams& params);

// Sharp bounds under the joint constraint set, along with the mean-shift
// parameters attaining each side.
struct DvSharpBounds : DvBounds {
  double delta1_upper = 0.0;  // attains mu1_upper
  double delta2_upper = 0.0;
  double delta1_lower = 0.0;  // attains mu1_lower
  double delta2_lower = 0.0;
};

DvSharpBounds dv_sharp_bounds(const BinaryStratum& stratum, const DvParams& params);

// Relaxed ratio interval ORR / ((L*Th+1)/(L+Th)) <= CRR <= ORR * (L*Th+1)/(L+Th)
// for the symmetric range lambda1 = 1/lambda2. Diagnostic only.
CrrInterval dv_relaxed_crr_bounds(const BinaryStratum& stratum, const DvParams& params);

// theta implied by the single-knob shrinkage delta at a given stratum;
// a nonpositive denominator yields +inf.
double theta_from_delta(double delta, double tau, double p1, BoundSide side);

// Data-independent envelopes of theta_from_delta over p1.
std::pair<double, double> theta_plus_minus(double delta, double tau);

// Aligned theta grid {theta+/2, theta+, 3*theta+/2}; entries below 1 are
// dropped (reported as NaN placeholders by callers).
std::vector<double> aligned_theta_grid(double delta, double tau);

// Mean-difference outcome constraint: max-min spread of the conditional
// outcome mean across confounder levels is at most delta_total.
BoundResult dmsm_bounds(double delta_total, const ArmSummary& treated, double propensity,
                        const SensitivityParams& lambdas);

// Mean-ratio outcome constraint for nonnegative outcomes.
BoundResult rmsm_bounds(double theta, const ArmSummary& treated, double propensity,
                        const SensitivityParams& lambdas);

}  // namespace emsm
