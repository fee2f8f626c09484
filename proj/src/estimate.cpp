#include "emsm/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emsm/distribution.hpp"
#include "emsm/stats.hpp"

namespace emsm {

namespace {

double shrinkage_delta(const SensitivityParams& params) {
  switch (params.outcome.kind) {
    case OutcomeSpec::Kind::Recommended:
      return params.outcome.delta;
    case OutcomeSpec::Kind::MsmUnrestricted:
      return 1.0;
    case OutcomeSpec::Kind::ExplicitDeltas:
      throw std::invalid_argument(
          "estimation requires the single-knob outcome specification");
  }
  throw std::logic_error("shrinkage_delta: unreachable");
}

struct ArmContext {
  double tau = 0.5;        // quantile level of the upper side
  double scale = 0.0;      // (lambda gap) * delta
};

ArmContext arm_context(Arm arm, const SensitivityParams& params) {
  const double delta = shrinkage_delta(params);
  if (arm == Arm::Treated) return {params.tau(), params.lambda_gap() * delta};
  if (params.lambda1 <= 0.0)
    throw std::invalid_argument("control-arm estimation requires lambda1 > 0");
  return {params.tau_control(), params.lambda_gap_control() * delta};
}

}  // namespace

double transformed_response(BoundSide side, Arm arm, double y, double q,
                            const SensitivityParams& params) {
  const ArmContext ctx = arm_context(arm, params);
  if (side == BoundSide::Upper) return y + ctx.scale * check_loss(ctx.tau, y, q);
  return y - ctx.scale * check_loss(1.0 - ctx.tau, y, q);
}

double phi_eval(BoundSide side, Arm arm, double y, int t, double pi, double q, double m,
                const SensitivityParams& params) {
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("phi_eval: pi outside (0,1)");
  const double own = arm == Arm::Treated ? (t == 1 ? 1.0 : 0.0) : (t == 0 ? 1.0 : 0.0);
  const double p_own = arm == Arm::Treated ? pi : 1.0 - pi;
  if (own == 0.0) return m;
  const double odds_other = (1.0 - p_own) / p_own;
  const double y_tilde = transformed_response(side, arm, y, q, params);
  return y / p_own + odds_other * (y_tilde - y) - (1.0 / p_own - 1.0) * m;
}

bool outcome_is_binary(const Dataset& data) {
  for (Eigen::Index i = 0; i < data.y.size(); ++i)
    if (data.y(i) != 0.0 && data.y(i) != 1.0) return false;
  return true;
}

namespace {

Eigen::VectorXd arm_weights(const Dataset& data, const Eigen::VectorXd& pi, Arm arm) {
  Eigen::VectorXd w(pi.size());
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    const bool own = arm == Arm::Treated ? data.t[static_cast<std::size_t>(i)] == 1
                                         : data.t[static_cast<std::size_t>(i)] == 0;
    const double p_own = arm == Arm::Treated ? pi(i) : 1.0 - pi(i);
    w(i) = own ? (1.0 - p_own) / p_own : 0.0;
  }
  return w;
}

Eigen::VectorXd transformed_vector(const Dataset& data, const Eigen::VectorXd& q, BoundSide side,
                                   Arm arm, const SensitivityParams& params) {
  Eigen::VectorXd z(data.y.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z(i) = transformed_response(side, arm, data.y(i), q(i), params);
  return z;
}

Eigen::VectorXd fit_mean_model(const Dataset& data, const DesignMatrix& f_design,
                               const Eigen::VectorXd& q_hat, const Eigen::VectorXd& weights,
                               BoundSide side, Arm arm, const SensitivityParams& params,
                               EstimationMethod method, const LassoConfig& lasso,
                               FittedModels& out) {
  const Eigen::VectorXd z = transformed_vector(data, q_hat, side, arm, params);
  if (method == EstimationMethod::Rcal) {
    RcalProblemData pd;
    pd.y = z;
    pd.weights = weights;
    const RcalResult r = fit_rcal_lasso(RcalProblem::WeightedLs, f_design.m, pd, lasso);
    return r.coef();
  }
  const FitResult fit = fit_weighted_ls(f_design.m, z, weights);
  out.diagnostics.emplace_back("mean_model", fit.diag);
  return fit.coef;
}

}  // namespace

FittedModels fit_working_models(const Dataset& data, const DesignMatrix& f_design,
                                const DesignMatrix& h_design, const SensitivityParams& params,
                                OutcomeLink link, EstimationMethod method,
                                const LassoConfig& lasso) {
  if (link == OutcomeLink::Logistic && !outcome_is_binary(data))
    throw std::invalid_argument("fit_working_models: logistic link needs a binary outcome");
  if (method == EstimationMethod::Rcal && link == OutcomeLink::Logistic)
    throw std::invalid_argument("fit_working_models: regularized path uses the linear link");

  FittedModels fm;
  fm.link = link;

  if (method == EstimationMethod::Rcal) {
    RcalProblemData pd;
    pd.t = data.t;
    pd.arm = 1;
    fm.gamma_treated = fit_rcal_lasso(RcalProblem::CalLogistic, f_design.m, pd, lasso).coef();
    pd.arm = 0;
    fm.gamma_control = fit_rcal_lasso(RcalProblem::CalLogistic, f_design.m, pd, lasso).coef();
  } else {
    const FitResult g1 = fit_cal_logistic(f_design.m, data.t, 1);
    const FitResult g0 = fit_cal_logistic(f_design.m, data.t, 0);
    fm.gamma_treated = g1.coef;
    fm.gamma_control = g0.coef;
    fm.diagnostics.emplace_back("propensity_treated", g1.diag);
    fm.diagnostics.emplace_back("propensity_control", g0.diag);
  }

  const Eigen::VectorXd pi_t = clip_probabilities(predict_logistic(f_design.m, fm.gamma_treated));
  const Eigen::VectorXd pi_c = clip_probabilities(predict_logistic(f_design.m, fm.gamma_control));
  const Eigen::VectorXd w1 = arm_weights(data, pi_t, Arm::Treated);
  const Eigen::VectorXd w0 = arm_weights(data, pi_c, Arm::Control);

  const double tau = params.tau();
  const double tau_c = arm_context(Arm::Control, params).tau;

  auto quantile_fit = [&](const Eigen::VectorXd& w, double level) {
    if (method == EstimationMethod::Rcal) {
      RcalProblemData pd;
      pd.y = data.y;
      pd.weights = w;
      pd.tau = level;
      return Eigen::VectorXd(fit_rcal_lasso(RcalProblem::WeightedQuantile, h_design.m, pd, lasso)
                                 .coef());
    }
    return fit_weighted_quantile(h_design.m, data.y, w, level).coef;
  };
  fm.beta_plus = quantile_fit(w1, tau);
  fm.beta_minus = quantile_fit(w1, 1.0 - tau);
  fm.beta0_plus = quantile_fit(w0, tau_c);
  fm.beta0_minus = quantile_fit(w0, 1.0 - tau_c);

  if (link == OutcomeLink::Logistic) {
    const FitResult p1 = fit_ml_logistic(f_design.m, data.y, w1);
    const FitResult p0 = fit_ml_logistic(f_design.m, data.y, w0);
    fm.alpha_plus = fm.alpha_minus = p1.coef;
    fm.alpha0_plus = fm.alpha0_minus = p0.coef;
    fm.diagnostics.emplace_back("prob_treated", p1.diag);
    fm.diagnostics.emplace_back("prob_control", p0.diag);
  } else {
    fm.alpha_plus = fit_mean_model(data, f_design, h_design.m * fm.beta_plus, w1,
                                   BoundSide::Upper, Arm::Treated, params, method, lasso, fm);
    fm.alpha_minus = fit_mean_model(data, f_design, h_design.m * fm.beta_minus, w1,
                                    BoundSide::Lower, Arm::Treated, params, method, lasso, fm);
    fm.alpha0_plus = fit_mean_model(data, f_design, h_design.m * fm.beta0_plus, w0,
                                    BoundSide::Upper, Arm::Control, params, method, lasso, fm);
    fm.alpha0_minus = fit_mean_model(data, f_design, h_design.m * fm.beta0_minus, w0,
                                     BoundSide::Lower, Arm::Control, params, method, lasso, fm);
  }
  return fm;
}

namespace {

double mean_model_value(const FittedModels& fm, BoundSide side, Arm arm, double f_alpha_or_prob,
                        double q, const SensitivityParams& params) {
  if (fm.link == OutcomeLink::Linear) return f_alpha_or_prob;
  const double p = logistic(f_alpha_or_prob);
  return p * transformed_response(side, arm, 1.0, q, params) +
         (1.0 - p) * transformed_response(side, arm, 0.0, q, params);
}

SideEstimate side_estimate(std::vector<double> phi) {
  SideEstimate s;
  s.estimate = mean(phi);
  s.variance = variance(phi);
  s.phi = std::move(phi);
  return s;
}

IntervalReport make_interval(SideEstimate lower, SideEstimate upper, double level, std::size_t n) {
  IntervalReport r;
  const double c = 1.0 - level;
  const double z1 = normal_quantile(1.0 - c);
  const double z2 = normal_quantile(1.0 - c / 2.0);
  const double dn = static_cast<double>(n);
  r.ci_one_sided_lower = lower.estimate - z1 * std::sqrt(lower.variance / dn);
  r.ci_one_sided_upper = upper.estimate + z1 * std::sqrt(upper.variance / dn);
  r.ci_two_lower = lower.estimate - z2 * std::sqrt(lower.variance / dn);
  r.ci_two_upper = upper.estimate + z2 * std::sqrt(upper.variance / dn);
  r.lower = std::move(lower);
  r.upper = std::move(upper);
  return r;
}

IntervalReport difference_interval(const IntervalReport& a, const IntervalReport& b, double level,
                                   std::size_t n) {
  // Bounds for a - b: upper = a.upper - b.lower with paired variance.
  std::vector<double> phi_up(n), phi_lo(n);
  for (std::size_t i = 0; i < n; ++i) {
    phi_up[i] = a.upper.phi[i] - b.lower.phi[i];
    phi_lo[i] = a.lower.phi[i] - b.upper.phi[i];
  }
  return make_interval(side_estimate(std::move(phi_lo)), side_estimate(std::move(phi_up)), level,
                       n);
}

std::optional<IntervalReport> ratio_interval(const IntervalReport& num, const IntervalReport& den,
                                             double level, std::size_t n) {
  // Bounds for a/b: upper = a.upper / b.lower, delta-method variance from
  // the paired influence functions.
  auto one_side = [&](const SideEstimate& a, const SideEstimate& b) -> std::optional<SideEstimate> {
    if (b.estimate <= 0.0) return std::nullopt;
    SideEstimate s;
    s.estimate = a.estimate / b.estimate;
    s.phi.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      s.phi[i] = s.estimate + (a.phi[i] - a.estimate) / b.estimate -
                 a.estimate / (b.estimate * b.estimate) * (b.phi[i] - b.estimate);
    s.variance = variance(s.phi);
    return s;
  };
  auto up = one_side(num.upper, den.lower);
  auto lo = one_side(num.lower, den.upper);
  if (!up || !lo) return std::nullopt;
  return make_interval(std::move(*lo), std::move(*up), level, n);
}

}  // namespace

EstimateReport estimate_bounds(const Dataset& data, const DesignMatrix& f_design,
                               const DesignMatrix& h_design, const FittedModels& models,
                               const SensitivityParams& params, double level) {
  const std::size_t n = data.n();
  if (n == 0) throw std::invalid_argument("estimate_bounds: empty dataset");
  if (data.n_treated() == 0 || data.n_control() == 0)
    throw std::invalid_argument("estimate_bounds: an arm is empty");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("estimate_bounds: level outside (0,1)");

  const Eigen::VectorXd pi_t =
      clip_probabilities(predict_logistic(f_design.m, models.gamma_treated));
  const Eigen::VectorXd pi_c =
      clip_probabilities(predict_logistic(f_design.m, models.gamma_control));
  const Eigen::VectorXd q1_up = h_design.m * models.beta_plus;
  const Eigen::VectorXd q1_lo = h_design.m * models.beta_minus;
  const Eigen::VectorXd q0_up = h_design.m * models.beta0_plus;
  const Eigen::VectorXd q0_lo = h_design.m * models.beta0_minus;
  const Eigen::VectorXd m1_up = f_design.m * models.alpha_plus;
  const Eigen::VectorXd m1_lo = f_design.m * models.alpha_minus;
  const Eigen::VectorXd m0_up = f_design.m * models.alpha0_plus;
  const Eigen::VectorXd m0_lo = f_design.m * models.alpha0_minus;

  std::vector<double> phi1_up(n), phi1_lo(n), phi0_up(n), phi0_lo(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double y = data.y(k);
    const int t = data.t[i];
    phi1_up[i] = phi_eval(BoundSide::Upper, Arm::Treated, y, t, pi_t(k), q1_up(k),
                          mean_model_value(models, BoundSide::Upper, Arm::Treated, m1_up(k),
                                           q1_up(k), params),
                          params);
    phi1_lo[i] = phi_eval(BoundSide::Lower, Arm::Treated, y, t, pi_t(k), q1_lo(k),
                          mean_model_value(models, BoundSide::Lower, Arm::Treated, m1_lo(k),
                                           q1_lo(k), params),
                          params);
    phi0_up[i] = phi_eval(BoundSide::Upper, Arm::Control, y, t, pi_c(k), q0_up(k),
                          mean_model_value(models, BoundSide::Upper, Arm::Control, m0_up(k),
                                           q0_up(k), params),
                          params);
    phi0_lo[i] = phi_eval(BoundSide::Lower, Arm::Control, y, t, pi_c(k), q0_lo(k),
                          mean_model_value(models, BoundSide::Lower, Arm::Control, m0_lo(k),
                                           q0_lo(k), params),
                          params);
  }

  EstimateReport report;
  report.level = level;
  report.n = n;
  report.mu1 = make_interval(side_estimate(std::move(phi1_lo)), side_estimate(std::move(phi1_up)),
                             level, n);
  report.mu0 = make_interval(side_estimate(std::move(phi0_lo)), side_estimate(std::move(phi0_up)),
                             level, n);
  report.ate = difference_interval(report.mu1, report.mu0, level, n);
  if (outcome_is_binary(data)) report.crr = ratio_interval(report.mu1, report.mu0, level, n);
  return report;
}

std::vector<GridCellReport> run_grid(const Dataset& data, const DesignMatrix& f_design,
                                     const DesignMatrix& h_design, const GridSpec& grid,
                                     EstimationMethod method, OutcomeLink link, double level,
                                     const LassoConfig& lasso) {
  if (grid.lambda_grid.empty() || grid.delta_grid.empty())
    throw std::invalid_argument("run_grid: empty grid");
  std::vector<GridCellReport> cells;
  std::vector<double> lambdas = grid.lambda_grid;
  std::vector<double> deltas = grid.delta_grid;
  std::sort(lambdas.begin(), lambdas.end());
  std::sort(deltas.begin(), deltas.end());

  // The propensity fits do not depend on (lambda, delta); reuse them.
  const FittedModels base = fit_working_models(
      data, f_design, h_design,
      SensitivityParams::symmetric(lambdas.front(), OutcomeSpec::recommended(deltas.front())),
      link, method, lasso);
  const Eigen::VectorXd pi_t =
      clip_probabilities(predict_logistic(f_design.m, base.gamma_treated));
  const Eigen::VectorXd pi_c =
      clip_probabilities(predict_logistic(f_design.m, base.gamma_control));
  Eigen::VectorXd w1(pi_t.size()), w0(pi_c.size());
  for (Eigen::Index i = 0; i < pi_t.size(); ++i) {
    w1(i) = data.t[static_cast<std::size_t>(i)] == 1 ? (1.0 - pi_t(i)) / pi_t(i) : 0.0;
    w0(i) = data.t[static_cast<std::size_t>(i)] == 0 ? pi_c(i) / (1.0 - pi_c(i)) : 0.0;
  }

  auto qfit = [&](const Eigen::VectorXd& w, double lvl) {
    if (method == EstimationMethod::Rcal) {
      RcalProblemData pd;
      pd.y = data.y;
      pd.weights = w;
      pd.tau = lvl;
      return Eigen::VectorXd(
          fit_rcal_lasso(RcalProblem::WeightedQuantile, h_design.m, pd, lasso).coef());
    }
    return fit_weighted_quantile(h_design.m, data.y, w, lvl).coef;
  };
  auto mfit = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& w, BoundSide side, Arm arm,
                  const SensitivityParams& params) {
    Eigen::VectorXd z(data.y.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z(i) = transformed_response(side, arm, data.y(i), q(i), params);
    if (method == EstimationMethod::Rcal) {
      RcalProblemData pd;
      pd.y = z;
      pd.weights = w;
      return Eigen::VectorXd(
          fit_rcal_lasso(RcalProblem::WeightedLs, f_design.m, pd, lasso).coef());
    }
    return fit_weighted_ls(f_design.m, z, w).coef;
  };
  auto flag_row = [&](double lambda, const std::string& what) {
    for (double delta : deltas) {
      GridCellReport cell;
      cell.lambda = lambda;
      cell.delta = delta;
      cell.error = what;
      cells.push_back(std::move(cell));
    }
  };

  for (double lambda : lambdas) {
    // Quantile fits depend on lambda only.
    FittedModels lam_models = base;
    const SensitivityParams probe =
        SensitivityParams::symmetric(lambda, OutcomeSpec::recommended(1.0));
    try {
      lam_models.beta_plus = qfit(w1, probe.tau());
      lam_models.beta_minus = qfit(w1, 1.0 - probe.tau());
      lam_models.beta0_plus = qfit(w0, probe.tau_control());
      lam_models.beta0_minus = qfit(w0, 1.0 - probe.tau_control());
    } catch (const std::exception& e) {
      flag_row(lambda, e.what());
      continue;
    }

    for (double delta : deltas) {
      const SensitivityParams params =
          SensitivityParams::symmetric(lambda, OutcomeSpec::recommended(delta));
      GridCellReport cell;
      cell.lambda = lambda;
      cell.delta = delta;
      try {
        FittedModels cell_models = lam_models;
        if (link == OutcomeLink::Linear) {
          cell_models.alpha_plus = mfit(h_design.m * lam_models.beta_plus, w1,
                                        BoundSide::Upper, Arm::Treated, params);
          cell_models.alpha_minus = mfit(h_design.m * lam_models.beta_minus, w1,
                                         BoundSide::Lower, Arm::Treated, params);
          cell_models.alpha0_plus = mfit(h_design.m * lam_models.beta0_plus, w0,
                                         BoundSide::Upper, Arm::Control, params);
          cell_models.alpha0_minus = mfit(h_design.m * lam_models.beta0_minus, w0,
                                          BoundSide::Lower, Arm::Control, params);
        }
        cell.report = estimate_bounds(data, f_design, h_design, cell_models, params, level);
      } catch (const std::exception& e) {
        // A failed cell is recorded, not fatal for the rest of the grid.
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace emsm
