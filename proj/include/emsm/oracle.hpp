#pragma once

#include <optional>
#include <vector>

#include "emsm/bounds.hpp"
#include "emsm/distribution.hpp"
#include "emsm/sensitivity.hpp"

namespace emsm {
namespace oracle {

// Small discrete problem instance used for brute-force verification.
struct DiscreteInstance {
  DiscreteDistribution y_treated;
  DiscreteDistribution y_control;
  double prob_t1 = 0.5;
  SensitivityParams params;

  DiscreteInstance(DiscreteDistribution y1, DiscreteDistribution y0, double prob_t1_,
                   SensitivityParams params_);
};

// A binary-confounder candidate: mass s at the high level, density-ratio
// values, and conditional means of the outcome given each level.
struct Candidate {
  double s = 0.5;          // Q(U=1 | T=1)
  double lambda_u1 = 1.0;
  double lambda_u0 = 1.0;
  double eta_u1 = 0.0;
  double eta_u0 = 0.0;
  double objective = 0.0;  // sum_u eta(u) lambda(u) Q(U=u | T=1)
};

struct EnumerationResult {
  double max_found = 0.0;
  Candidate argmax;
  double grid_slack = 0.0;  // reported search-resolution budget
};

// Grid search over feasible binary-confounder constructions for the extreme
// of the treated-arm conditional mean under the resolved constraints.
// Feasibility uses only the range constraints and the attainable-mean
// interval of an s-mass slice of the observed law.
EnumerationResult enumerate_emsm_bound(const DiscreteInstance& instance, int grid_resolution,
                                       bool upper = true);

// Objective of an explicit construction: sum_u eta(u) lambda(u) Q(u|T=1),
// with eta recomputed from the re-mixed laws.
double evaluate_construction_objective(const WorstCaseConstruction& w);

struct DvEnumerationResult {
  double max_found = 0.0;
  double min_found = 0.0;
  double argmax_delta1 = 0.0;
  double argmax_delta2 = 0.0;
  double argmin_delta1 = 0.0;
  double argmin_delta2 = 0.0;
  double grid_slack = 0.0;
};

// Grid search over mean-shift pairs compatible with a ratio bound theta,
// evaluating the closed-form binary bounds at each pair.
DvEnumerationResult enumerate_dv_bound(double p1, double prob_t0, double lambda1, double lambda2,
                                       double theta, int grid_resolution);

struct DualityScanResult {
  double min_value = 0.0;
  double argmin_q = 0.0;
  std::vector<double> argmin_set;
  bool contains_q_star = false;
  double grid_slack = 0.0;
};

// Evaluates the q-indexed relaxed upper bound over a grid and reports the
// minimum and its argmin set.
DualityScanResult duality_scan(const DiscreteInstance& instance, std::vector<double> q_grid);

}  // namespace oracle
}  // namespace emsm
