#include <doctest.h>

#include <cmath>

#include "emsm/estimate.hpp"
#include "emsm/stats.hpp"
#include "emsm/synthetic.hpp"

using namespace emsm;

namespace {

SensitivityParams rec_params(double lambda, double delta) {
  return SensitivityParams::symmetric(lambda, OutcomeSpec::recommended(delta));
}

DesignMatrix saturated_design(const Dataset& data) {
  return build_design(data.x, data.covariate_names,
                      {DesignTerms::MainPlusInteractions, false, 0});
}

DesignMatrix main_design(const Dataset& data) {
  return build_design(data.x, data.covariate_names, {DesignTerms::MainEffects, false, 0});
}

}  // namespace

TEST_CASE("estimating function values") {
  const SensitivityParams params = rec_params(2.0, 1.0);  // (L2-L1)*delta = 1.5, tau = 2/3

  // A control unit contributes its regression value.
  CHECK(phi_eval(BoundSide::Upper, Arm::Treated, 0.3, 0, 0.4, 0.0, 0.77, params) == 0.77);

  // Direct substitution for a treated unit.
  const double phi =
      phi_eval(BoundSide::Upper, Arm::Treated, 1.0, 1, 0.5, 0.0, 1.0, params);
  CHECK(phi == doctest::Approx(2.0 + 1.5 * (2.0 / 3.0) - 1.0));

  // Zero shrinkage reduces to the plain augmented IPW score.
  const SensitivityParams zero = rec_params(2.0, 0.0);
  const double phi0 = phi_eval(BoundSide::Upper, Arm::Treated, 1.0, 1, 0.5, 0.0, 0.9, zero);
  CHECK(phi0 == doctest::Approx(1.0 / 0.5 - (1.0 / 0.5 - 1.0) * 0.9));

  CHECK_THROWS(phi_eval(BoundSide::Upper, Arm::Treated, 1.0, 1, 1.0, 0.0, 0.0, params));
  CHECK_THROWS(phi_eval(BoundSide::Upper, Arm::Treated, 1.0, 1, 0.5, 0.0, 0.0,
                        SensitivityParams(0.5, 2.0, OutcomeSpec::explicit_deltas(0.1, 0.1))));
}

TEST_CASE("transformed response brackets the outcome") {
  const SensitivityParams params = rec_params(2.0, 0.5);
  for (double y : {-1.0, 0.0, 0.7, 2.5}) {
    for (double q : {-0.5, 0.0, 1.0}) {
      CHECK(transformed_response(BoundSide::Upper, Arm::Treated, y, q, params) >= y);
      CHECK(transformed_response(BoundSide::Lower, Arm::Treated, y, q, params) <= y);
    }
  }
}

TEST_CASE("wald interval arithmetic") {
  // mu+ = 0.775, V+ = 0.04, n = 400, c = 0.1: one-sided end 0.775 + 1.28155*0.01.
  Dataset data;
  data.y.resize(4);
  data.y << 0, 1, 0, 1;
  data.t = {0, 1, 0, 1};
  data.x = Eigen::MatrixXd::Zero(4, 0);
  (void)data;

  std::vector<double> phi(400);
  // Two-point mass with mean 0.775 and variance 0.04.
  const double a = 0.775 - 0.2, b = 0.775 + 0.2;
  for (std::size_t i = 0; i < 400; ++i) phi[i] = i < 200 ? a : b;
  CHECK(mean(phi) == doctest::Approx(0.775));
  CHECK(variance(phi) == doctest::Approx(0.04));
  const double z10 = normal_quantile(0.9);
  CHECK(z10 == doctest::Approx(1.2815515655).epsilon(1e-9));
  CHECK(0.775 + z10 * std::sqrt(0.04 / 400.0) == doctest::Approx(0.78782).epsilon(1e-4));
  CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536270).epsilon(1e-9));
}

TEST_CASE("population identities of the estimating function") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::AllCorrect, 2.0, 0.5, 100);
  const SyntheticTruth truth = dgp_truth(dgp);
  const std::size_t k = dgp.strata.size();
  const double tau = dgp.params.tau();

  std::vector<double> pi_true(k), pi_wrong(k), q_true(k), q_off(k);
  for (std::size_t s = 0; s < k; ++s) {
    pi_true[s] = dgp.strata[s].propensity;
    pi_wrong[s] = 0.35 + 0.1 * dgp.strata[s].x[0];
    q_true[s] = dgp.strata[s].y_treated.quantile(tau);
    q_off[s] = 0.0;  // deliberately not the quantile
  }
  const std::vector<double> m_true = exact_mean_model(dgp, BoundSide::Upper, Arm::Treated, q_true);
  std::vector<double> m_wrong = m_true;
  for (auto& v : m_wrong) v += 0.17;

  // Either correct propensity or correct regression identifies the bound.
  const double target = exact_mu_bound_at_q(dgp, BoundSide::Upper, Arm::Treated, q_true);
  CHECK(std::fabs(exact_phi_mean(dgp, BoundSide::Upper, Arm::Treated, pi_true, q_true, m_wrong) -
                  target) <= 1e-10);
  CHECK(std::fabs(exact_phi_mean(dgp, BoundSide::Upper, Arm::Treated, pi_wrong, q_true, m_true) -
                  target) <= 1e-10);
  CHECK(std::fabs(target - truth.bounds.mu1_upper) <= 1e-12);

  // An off-quantile threshold still gives a valid relaxed upper bound.
  const std::vector<double> m_off = exact_mean_model(dgp, BoundSide::Upper, Arm::Treated, q_off);
  const double relaxed =
      exact_phi_mean(dgp, BoundSide::Upper, Arm::Treated, pi_wrong, q_off, m_off);
  CHECK(relaxed >= truth.bounds.mu1_upper - 1e-12);
}

TEST_CASE("pointwise dominance with a shared regression value") {
  const SensitivityParams params = rec_params(1.8, 0.7);
  for (double y : {0.0, 0.4, 1.0})
    for (int t : {0, 1})
      for (double pi : {0.2, 0.5, 0.8}) {
        const double up = phi_eval(BoundSide::Upper, Arm::Treated, y, t, pi, 1.0, 0.55, params);
        const double lo = phi_eval(BoundSide::Lower, Arm::Treated, y, t, pi, 0.0, 0.55, params);
        CHECK(up >= lo - 1e-14);
      }
}

TEST_CASE("fitted bounds on synthetic data") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::AllCorrect, 2.0, 0.5, 1500);
  const Dataset data = generate_synthetic(dgp, 42);
  const DesignMatrix f = saturated_design(data);
  const SensitivityParams params = rec_params(2.0, 0.5);

  for (OutcomeLink link : {OutcomeLink::Linear, OutcomeLink::Logistic}) {
    const FittedModels models =
        fit_working_models(data, f, f, params, link, EstimationMethod::Cal);
    const EstimateReport report = estimate_bounds(data, f, f, models, params, 0.9);

    // Empirical-variance identity and interval nesting.
    CHECK(report.mu1.upper.estimate == doctest::Approx(mean(report.mu1.upper.phi)));
    CHECK(report.mu1.upper.variance == doctest::Approx(variance(report.mu1.upper.phi)));
    CHECK(report.mu1.lower.estimate <= report.mu1.upper.estimate + 1e-12);
    // The two-sided interval contains the point-bound interval.
    CHECK(report.mu1.ci_two_lower <= report.mu1.lower.estimate + 1e-12);
    CHECK(report.mu1.ci_two_upper >= report.mu1.upper.estimate - 1e-12);
    CHECK(report.ate.ci_two_lower <= report.ate.lower.estimate + 1e-12);
    CHECK(report.ate.ci_two_upper >= report.ate.upper.estimate - 1e-12);

    // The sample bounds should sit near the population sharp bounds.
    const SyntheticTruth truth = dgp_truth(dgp);
    CHECK(std::fabs(report.mu1.upper.estimate - truth.bounds.mu1_upper) < 0.06);
    CHECK(std::fabs(report.mu1.lower.estimate - truth.bounds.mu1_lower) < 0.06);
    CHECK(std::fabs(report.ate.upper.estimate - truth.bounds.ate_upper) < 0.09);
    REQUIRE(report.crr.has_value());
  }
}

TEST_CASE("zero shrinkage collapses the two sides") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::AllCorrect, 2.0, 0.0, 800);
  const Dataset data = generate_synthetic(dgp, 7);
  const DesignMatrix f = saturated_design(data);
  const SensitivityParams params = rec_params(2.0, 0.0);
  const FittedModels models =
      fit_working_models(data, f, f, params, OutcomeLink::Linear, EstimationMethod::Cal);
  const EstimateReport report = estimate_bounds(data, f, f, models, params, 0.9);
  CHECK(report.mu1.upper.estimate == doctest::Approx(report.mu1.lower.estimate).epsilon(1e-12));
}

TEST_CASE("grid reuse and collapse at lambda = 1") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::AllCorrect, 2.0, 0.5, 600);
  const Dataset data = generate_synthetic(dgp, 77);
  const DesignMatrix f = main_design(data);

  GridSpec grid{{1.0}, {0.2, 1.0}};
  const auto cells =
      run_grid(data, f, f, grid, EstimationMethod::Cal, OutcomeLink::Linear, 0.9);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].report.mu1.upper.estimate ==
        doctest::Approx(cells[1].report.mu1.upper.estimate).epsilon(1e-12));
  CHECK(cells[0].report.ate.lower.estimate ==
        doctest::Approx(cells[1].report.ate.lower.estimate).epsilon(1e-12));
}

TEST_CASE("full grid produces one report per cell with ordered bounds") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::AllCorrect, 2.0, 0.5, 900);
  const Dataset data = generate_synthetic(dgp, 3);
  const DesignMatrix f = saturated_design(data);

  GridSpec grid{{1.0, 1.2, 1.5, 2.0}, {0.2, 0.5, 0.8, 1.0}};
  const auto cells =
      run_grid(data, f, f, grid, EstimationMethod::Cal, OutcomeLink::Linear, 0.9);
  REQUIRE(cells.size() == 16);
  for (const auto& cell : cells) {
    CHECK(cell.report.mu1.lower.estimate <= cell.report.mu1.upper.estimate + 1e-10);
    CHECK(std::isfinite(cell.report.ate.ci_two_lower));
  }
  // Population-bound widths grow in both knobs; check on the plug-in truth.
  auto width = [&](double lambda, double delta) {
    SyntheticDgp d2 = dgp;
    d2.params = rec_params(lambda, delta);
    const SyntheticTruth t = dgp_truth(d2);
    return t.bounds.mu1_upper - t.bounds.mu1_lower;
  };
  for (double delta : grid.delta_grid)
    for (std::size_t i = 1; i < grid.lambda_grid.size(); ++i)
      CHECK(width(grid.lambda_grid[i], delta) >= width(grid.lambda_grid[i - 1], delta) - 1e-12);
  for (double lambda : grid.lambda_grid)
    for (std::size_t i = 1; i < grid.delta_grid.size(); ++i)
      CHECK(width(lambda, grid.delta_grid[i]) >= width(lambda, grid.delta_grid[i - 1]) - 1e-12);
}

TEST_CASE("degenerate inputs are rejected") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::AllCorrect, 2.0, 0.5, 60);
  Dataset data = generate_synthetic(dgp, 2);
  const DesignMatrix f = main_design(data);
  const SensitivityParams params = rec_params(2.0, 0.5);
  const FittedModels models =
      fit_working_models(data, f, f, params, OutcomeLink::Linear, EstimationMethod::Cal);
  CHECK_THROWS(estimate_bounds(data, f, f, models, params, 1.2));

  Dataset one_arm = data;
  for (auto& t : one_arm.t) t = 1;
  CHECK_THROWS(estimate_bounds(one_arm, f, f, models, params, 0.9));
  CHECK_THROWS(fit_cal_logistic(f.m, one_arm.t, 1));
}

TEST_CASE("regularized grid runs end to end") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::AllCorrect, 2.0, 0.5, 250);
  const Dataset data = generate_synthetic(dgp, 13);
  const DesignMatrix f = saturated_design(data);
  GridSpec grid{{1.5}, {0.5}};
  LassoConfig lasso;
  lasso.seed = 3;
  lasso.grid_size = 8;
  const auto cells =
      run_grid(data, f, f, grid, EstimationMethod::Rcal, OutcomeLink::Linear, 0.9, lasso);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].report.mu1.lower.estimate <= cells[0].report.mu1.upper.estimate + 1e-10);
  CHECK(std::isfinite(cells[0].report.ate.ci_two_upper));
}

TEST_CASE("upper bound never falls below the lower bound with calibrated weights") {
  const SyntheticDgp dgp = make_binary_dgp(DgpFlavor::MeanMisspecified, 1.5, 0.8, 700);
  const Dataset data = generate_synthetic(dgp, 11);
  const DesignMatrix f = main_design(data);
  const SensitivityParams params = rec_params(1.5, 0.8);
  const FittedModels models =
      fit_working_models(data, f, f, params, OutcomeLink::Linear, EstimationMethod::Cal);
  const EstimateReport report = estimate_bounds(data, f, f, models, params, 0.9);
  CHECK(report.mu1.upper.estimate >= report.mu1.lower.estimate - 1e-10);
  CHECK(report.mu0.upper.estimate >= report.mu0.lower.estimate - 1e-10);
}
