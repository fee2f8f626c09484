#include <doctest.h>

#include <cmath>

#include "emsm/fit.hpp"
#include "emsm/rng.hpp"

using namespace emsm;

namespace {

struct Problem {
  Eigen::MatrixXd design;
  RcalProblemData data;
};

Problem make_problem(Rng& rng, Eigen::Index n, Eigen::Index p) {
  Problem pr;
  pr.design.resize(n, p);
  pr.design.col(0).setOnes();
  for (Eigen::Index j = 1; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) pr.design(i, j) = rng.normal();
  pr.data.t.resize(static_cast<std::size_t>(n));
  pr.data.y.resize(n);
  pr.data.weights.resize(n);
  pr.data.tau = 0.65;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = 0.4 * pr.design(i, 1) - 0.6 * pr.design(i, 2);
    pr.data.t[static_cast<std::size_t>(i)] = rng.bernoulli(logistic(eta)) ? 1 : 0;
    pr.data.y(i) = 1.0 + 0.8 * pr.design(i, 1) + rng.normal();
    pr.data.weights(i) = pr.data.t[static_cast<std::size_t>(i)] == 1 ? rng.uniform(0.3, 2.0) : 0.0;
  }
  pr.data.weights(0) = 1.0;
  pr.data.arm = 1;
  return pr;
}

}  // namespace

TEST_CASE("scalar soft threshold") {
  // min 1/2 (x-3)^2 + |x|  ->  x = 2
  CHECK(soft_threshold(3.0, 1.0) == doctest::Approx(2.0));
  CHECK(soft_threshold(-3.0, 1.0) == doctest::Approx(-2.0));
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
}

TEST_CASE("zero penalty matches the plain fits") {
  Rng rng(21);
  const Problem pr = make_problem(rng, 150, 5);
  LassoConfig cfg;
  cfg.seed = 7;

  {
    const FitResult lasso0 = rcal_fit_at(RcalProblem::CalLogistic, pr.design, pr.data, 0.0, cfg);
    const FitResult plain = fit_cal_logistic(pr.design, pr.data.t, 1);
    CHECK((lasso0.coef - plain.coef).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
  {
    const FitResult lasso0 =
        rcal_fit_at(RcalProblem::WeightedQuantile, pr.design, pr.data, 0.0, cfg);
    const FitResult plain =
        fit_weighted_quantile(pr.design, pr.data.y, pr.data.weights, pr.data.tau);
    CHECK((lasso0.coef - plain.coef).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
  {
    const FitResult lasso0 = rcal_fit_at(RcalProblem::WeightedLs, pr.design, pr.data, 0.0, cfg);
    const FitResult plain = fit_weighted_ls(pr.design, pr.data.y, pr.data.weights);
    CHECK((lasso0.coef - plain.coef).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("path properties for each problem kind") {
  Rng rng(33);
  const Problem pr = make_problem(rng, 200, 12);
  LassoConfig cfg;
  cfg.seed = 11;
  cfg.grid_size = 12;

  for (RcalProblem kind :
       {RcalProblem::CalLogistic, RcalProblem::WeightedQuantile, RcalProblem::WeightedLs}) {
    const RcalResult res = fit_rcal_lasso(kind, pr.design, pr.data, cfg);
    REQUIRE(res.path.size() == 12);
    // The largest penalty keeps only the intercept.
    CHECK(res.path[0].nonzero == 0);
    CHECK(res.path[0].kappa == doctest::Approx(res.kappa_star));
    for (const auto& pt : res.path) CHECK(pt.kkt_residual <= 1e-6);
    // Support grows (weakly) as the penalty decays.
    CHECK(res.path.back().nonzero >= res.path.front().nonzero);

    // Above kappa*, the null model still satisfies the optimality system.
    const FitResult at_2k =
        rcal_fit_at(kind, pr.design, pr.data, 2.0 * res.kappa_star, cfg);
    for (Eigen::Index j = 1; j < at_2k.coef.size(); ++j) CHECK(at_2k.coef(j) == 0.0);
  }
}

TEST_CASE("cross-validation is deterministic in the seed") {
  Rng rng(55);
  const Problem pr = make_problem(rng, 160, 8);
  LassoConfig cfg;
  cfg.seed = 123;
  cfg.grid_size = 8;
  const RcalResult a = fit_rcal_lasso(RcalProblem::WeightedLs, pr.design, pr.data, cfg);
  const RcalResult b = fit_rcal_lasso(RcalProblem::WeightedLs, pr.design, pr.data, cfg);
  CHECK(a.selected == b.selected);
  CHECK((a.coef() - b.coef()).lpNorm<Eigen::Infinity>() == 0.0);
  for (std::size_t j = 0; j < a.path.size(); ++j)
    CHECK(a.path[j].cv_loss == b.path[j].cv_loss);

  // Fold labels are a pure function of (seed, n).
  const auto f1 = fold_assignment(123, 160, 5);
  const auto f2 = fold_assignment(123, 160, 5);
  CHECK(f1 == f2);
  const auto f3 = fold_assignment(124, 160, 5);
  CHECK(f1 != f3);
}

TEST_CASE("lasso recovers a sparse signal") {
  Rng rng(77);
  const Eigen::Index n = 250, p = 30;
  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  for (Eigen::Index j = 1; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) design(i, j) = rng.normal();
  RcalProblemData data;
  data.y.resize(n);
  data.weights = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i)
    data.y(i) = 1.5 + 2.0 * design(i, 1) - 1.5 * design(i, 2) + 0.3 * rng.normal();

  LassoConfig cfg;
  cfg.seed = 5;
  const RcalResult res = fit_rcal_lasso(RcalProblem::WeightedLs, design, data, cfg);
  const Eigen::VectorXd coef = res.coef();
  CHECK(std::fabs(coef(1)) > 1.0);
  CHECK(std::fabs(coef(2)) > 0.8);
  int spurious = 0;
  for (Eigen::Index j = 3; j < p; ++j)
    if (std::fabs(coef(j)) > 0.15) ++spurious;
  CHECK(spurious <= 2);
}
