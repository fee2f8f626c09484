#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "emsm/dataset.hpp"
#include "emsm/design.hpp"
#include "emsm/dv.hpp"

namespace emsm {

// Plug-in models for the ratio-constraint pipeline: outcome-probability
// models per arm and the propensity, all maximum-likelihood logistic.
struct DvPluginModels {
  Eigen::VectorXd coef_p1;
  Eigen::VectorXd coef_p0;
  Eigen::VectorXd coef_pi;
};

DvPluginModels fit_dv_plugin_models(const Dataset& data, const DesignMatrix& design);

struct DvPointBounds {
  double mu1_upper = 0.0;
  double mu1_lower = 0.0;
  double mu0_upper = 0.0;
  double mu0_lower = 0.0;
  double ate_upper = 0.0;
  double ate_lower = 0.0;
  CrrInterval crr;
};

// Sample averages of the iterated-expectation integrands with fitted
// plug-in predictions.
DvPointBounds dv_unconditional_bounds(const Dataset& data, const DesignMatrix& design,
                                      const DvPluginModels& models, const DvParams& params);

struct BootstrapConfig {
  int replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.9;
  int threads = 0;  // 0 = hardware concurrency
};

struct DvBootstrapResult {
  DvPointBounds point;              // bounds on the original sample
  DvPointBounds interval_lower;     // lower percentile endpoints
  DvPointBounds interval_upper;     // upper percentile endpoints
  DvPointBounds se_lower;           // back-solved SEs matching the interval
  DvPointBounds se_upper;
  int failed_replicates = 0;
};

// Row resampling with replacement; replicate r is keyed by (seed, r) so the
// output is bit-identical across runs and thread counts. Replicates whose
// model fits fail are dropped and counted; more than 5% failures is an
// error.
DvBootstrapResult dv_bootstrap_ci(const Dataset& data, const DesignMatrix& design,
                                  const DvParams& params, const BootstrapConfig& config);

// Normal-approximation variances for the stratum-level treatment-effect
// bounds given estimates and standard errors (single-stratum diagnostic).
std::pair<double, double> dv_cate_variance_bounds(double p1_hat, double p0_hat, double pi_hat,
                                                  double se_p1, double se_p0, double se_pi,
                                                  const DvParams& params);

}  // namespace emsm
