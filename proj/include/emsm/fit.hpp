#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace emsm {

struct FitDiagnostics {
  int iterations = 0;
  double grad_norm = 0.0;  // sup-norm at the reported solution
  bool converged = false;
};

struct FitResult {
  Eigen::VectorXd coef;
  FitDiagnostics diag;
};

// Calibration loss for the logistic propensity model. arm = 1 fits
// mean{T exp(-f'g) + (1-T) f'g}; arm = 0 fits mean{(1-T) exp(f'g) - T f'g}.
// Damped Newton from zero; sup-norm gradient tolerance 1e-9. Separation is
// reported as an error naming the runaway columns.
FitResult fit_cal_logistic(const Eigen::MatrixXd& design, const std::vector<int>& t, int arm);

// Weighted check-loss regression at level tau, by smoothed-loss continuation
// (logistic smoothing, eps schedule {1e-2,1e-4,1e-6} * scale(y)) followed by
// an exact intercept polish. Column 0 of the design must be the intercept.
FitResult fit_weighted_quantile(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weights, double tau);

// Weighted least squares through the normal equations with one step of
// iterative refinement. A rank-deficient weighted Gram matrix is an error
// listing the dependent columns.
FitResult fit_weighted_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                          const Eigen::VectorXd& weights);

// Maximum-likelihood logistic regression of a binary response, optionally
// weighted; used by the plug-in pipelines.
FitResult fit_ml_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& weights);

double logistic(double u);

Eigen::VectorXd predict_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& coef);

// Fitted probabilities clipped away from {0,1} before they enter weights.
Eigen::VectorXd clip_probabilities(Eigen::VectorXd p, double eps = 1e-6);

// ---- Lasso-regularized variants ----

struct LassoConfig {
  int folds = 5;
  std::uint64_t seed = 0;
  int grid_size = 25;      // kappa* / 2^{j/4}, j = 0..grid_size-1
  double kkt_tol = 1e-7;
  int max_iterations = 200000;
};

enum class RcalProblem { CalLogistic, WeightedQuantile, WeightedLs };

struct RcalProblemData {
  std::vector<int> t;       // CalLogistic
  int arm = 1;              // CalLogistic
  Eigen::VectorXd y;        // WeightedQuantile / WeightedLs response
  Eigen::VectorXd weights;  // WeightedQuantile / WeightedLs
  double tau = 0.5;         // WeightedQuantile
};

struct RcalPathPoint {
  double kappa = 0.0;
  Eigen::VectorXd coef;
  double kkt_residual = 0.0;
  double cv_loss = 0.0;
  int nonzero = 0;  // non-intercept support size
};

struct RcalResult {
  std::vector<RcalPathPoint> path;  // kappa descending from kappa*
  double kappa_star = 0.0;
  int selected = 0;                 // index into path (CV minimizer)
  Eigen::VectorXd coef() const { return path[static_cast<std::size_t>(selected)].coef; }
};

// Proximal-gradient Lasso over the kappa grid with the intercept unpenalized,
// warm starts along the path, and fivefold cross-validation on the problem's
// own loss. Fold assignment is a pure function of (seed, n).
RcalResult fit_rcal_lasso(RcalProblem kind, const Eigen::MatrixXd& design,
                          const RcalProblemData& data, const LassoConfig& config);

// Penalized fit at one fixed kappa (exposed for tests).
FitResult rcal_fit_at(RcalProblem kind, const Eigen::MatrixXd& design,
                      const RcalProblemData& data, double kappa, const LassoConfig& config);

// KKT residual of a candidate solution at penalty kappa.
double rcal_kkt_residual(RcalProblem kind, const Eigen::MatrixXd& design,
                         const RcalProblemData& data, const Eigen::VectorXd& coef, double kappa);

double soft_threshold(double x, double k);

}  // namespace emsm
