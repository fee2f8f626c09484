#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emsm/bounds.hpp"
#include "emsm/dataset.hpp"
#include "emsm/distribution.hpp"
#include "emsm/estimate.hpp"
#include "emsm/sensitivity.hpp"

namespace emsm {

// One covariate stratum of a finite-support generating process.
struct StratumSpec {
  double weight = 1.0;
  std::vector<double> x;
  double propensity = 0.5;
  DiscreteDistribution y_treated{{0.0}, {1.0}};
  DiscreteDistribution y_control{{0.0}, {1.0}};
};

// Finite-support generating process whose population bounds are available in
// closed form. The latent binary confounder implied by the worst-case
// re-mixing satisfies the declared sensitivity constraints by construction;
// verify_dgp_constraints checks this exactly.
struct SyntheticDgp {
  std::vector<StratumSpec> strata;
  std::vector<std::string> covariate_names;
  SensitivityParams params;
  std::size_t n = 1000;
};

enum class DgpFlavor { AllCorrect, PropensityMisspecified, MeanMisspecified };

// Two binary covariates, four strata, binary outcomes. The flavor controls
// whether the true propensity or the true outcome means carry an
// interaction term that a main-effects working model misses.
SyntheticDgp make_binary_dgp(DgpFlavor flavor, double lambda, double delta, std::size_t n);

struct StratumTruth {
  double psi_plus = 1.0;
  double psi_minus = 1.0;
  BoundResult treated;  // nu1 bounds
  BoundResult control;  // nu0 bounds
};

struct SyntheticTruth {
  PopulationBounds bounds;
  double mu1_identified = 0.0;
  double mu0_identified = 0.0;
  std::vector<StratumTruth> strata;
};

SyntheticTruth dgp_truth(const SyntheticDgp& dgp);

// Exact verification that the worst-case re-mixed laws of every stratum are
// proper distributions within the declared constraint ranges.
void verify_dgp_constraints(const SyntheticDgp& dgp, double tol = 1e-10);

Dataset generate_synthetic(const SyntheticDgp& dgp, std::uint64_t seed);

// Exact population mean of the estimating function when the working
// functions are tables over strata (enumeration, no sampling).
double exact_phi_mean(const SyntheticDgp& dgp, BoundSide side, Arm arm,
                      std::span<const double> pi_x, std::span<const double> q_x,
                      std::span<const double> m_x);

// Exact transformed-outcome regression E{Y~(q) | arm, x} per stratum.
std::vector<double> exact_mean_model(const SyntheticDgp& dgp, BoundSide side, Arm arm,
                                     std::span<const double> q_x);

// mu bound evaluated at arbitrary per-stratum thresholds q(x); equals the
// sharp bound when q(x) is the relevant quantile.
double exact_mu_bound_at_q(const SyntheticDgp& dgp, BoundSide side, Arm arm,
                           std::span<const double> q_x);

}  // namespace emsm
