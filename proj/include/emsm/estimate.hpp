#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "emsm/dataset.hpp"
#include "emsm/design.hpp"
#include "emsm/fit.hpp"
#include "emsm/sensitivity.hpp"

namespace emsm {

enum class Arm { Treated, Control };
enum class OutcomeLink { Linear, Logistic };
enum class EstimationMethod { Cal, Rcal };

// Y~(q): the outcome plus/minus the scaled check loss at q. The scale is
// (lambda2-lambda1)*delta for the treated arm and its label-flipped
// counterpart for the control arm; estimation requires the single-knob
// outcome specification (the unrestricted case runs as delta = 1).
double transformed_response(BoundSide side, Arm arm, double y, double q,
                            const SensitivityParams& params);

// Augmented IPW estimating function for one unit.
double phi_eval(BoundSide side, Arm arm, double y, int t, double pi, double q, double m,
                const SensitivityParams& params);

struct FittedModels {
  Eigen::VectorXd gamma_treated;  // propensity, calibrated for the treated weights
  Eigen::VectorXd gamma_control;
  Eigen::VectorXd beta_plus;      // quantile model at tau, treated arm
  Eigen::VectorXd beta_minus;     // at 1-tau
  Eigen::VectorXd beta0_plus;     // at tau', control arm
  Eigen::VectorXd beta0_minus;
  // Outcome-mean models. Linear link: coefficients on f for the transformed
  // response. Logistic link (binary outcomes): coefficients of the outcome
  // probability model, composed with the response transform at evaluation.
  Eigen::VectorXd alpha_plus;
  Eigen::VectorXd alpha_minus;
  Eigen::VectorXd alpha0_plus;
  Eigen::VectorXd alpha0_minus;
  OutcomeLink link = OutcomeLink::Linear;
  std::vector<std::pair<std::string, FitDiagnostics>> diagnostics;
};

FittedModels fit_working_models(const Dataset& data, const DesignMatrix& f_design,
                                const DesignMatrix& h_design, const SensitivityParams& params,
                                OutcomeLink link, EstimationMethod method,
                                const LassoConfig& lasso = {});

struct SideEstimate {
  double estimate = 0.0;
  double variance = 0.0;  // mean((phi_i - estimate)^2)
  std::vector<double> phi;
};

struct IntervalReport {
  SideEstimate lower;
  SideEstimate upper;
  double ci_one_sided_lower = 0.0;  // [this, +inf) at level 1-c
  double ci_one_sided_upper = 0.0;  // (-inf, this] at level 1-c
  double ci_two_lower = 0.0;        // two-sided level 1-c interval
  double ci_two_upper = 0.0;
};

struct EstimateReport {
  IntervalReport mu1;
  IntervalReport mu0;
  IntervalReport ate;
  std::optional<IntervalReport> crr;  // binary outcomes, ratio of mu bounds
  double level = 0.9;
  std::size_t n = 0;
};

EstimateReport estimate_bounds(const Dataset& data, const DesignMatrix& f_design,
                               const DesignMatrix& h_design, const FittedModels& models,
                               const SensitivityParams& params, double level);

struct GridSpec {
  std::vector<double> lambda_grid;  // symmetric ranges lambda1 = 1/lambda
  std::vector<double> delta_grid;
};

struct GridCellReport {
  double lambda = 1.0;
  double delta = 1.0;
  EstimateReport report;
  std::string error;  // nonempty when the cell's pipeline failed
  bool ok() const { return error.empty(); }
};

// Full grid run: the propensity fits are shared across the grid, quantile
// fits are refreshed per lambda, and mean fits per (lambda, delta).
std::vector<GridCellReport> run_grid(const Dataset& data, const DesignMatrix& f_design,
                                     const DesignMatrix& h_design, const GridSpec& grid,
                                     EstimationMethod method, OutcomeLink link, double level,
                                     const LassoConfig& lasso = {});

bool outcome_is_binary(const Dataset& data);

}  // namespace emsm
