#include <doctest.h>

#include <cmath>

#include "emsm/dataset.hpp"
#include "emsm/design.hpp"
#include "emsm/rng.hpp"

using namespace emsm;

TEST_CASE("main effects layout") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 1, 1, 0, 1, 1, 0, 0;
  const DesignMatrix d = build_design(x, {"a", "b"}, {DesignTerms::MainEffects, false, 0});
  CHECK(d.cols() == 3);
  CHECK(d.columns[0].name == "(intercept)");
  CHECK(d.columns[1].name == "a");
  CHECK((d.m.col(0).array() == 1.0).all());
}

TEST_CASE("standardized columns have mean zero and unit variance") {
  Rng rng(3);
  Eigen::MatrixXd x(200, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-2.0, 5.0);
  const DesignMatrix d =
      build_design(x, {"a", "b", "c"}, {DesignTerms::MainPlusInteractions, true, 0});
  CHECK(d.cols() == 1 + 3 + 3);
  for (Eigen::Index j = 1; j < d.cols(); ++j) {
    CHECK(std::fabs(d.m.col(j).mean()) <= 1e-10);
    const double var = d.m.col(j).squaredNorm() / static_cast<double>(d.rows());
    CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
  }
  // Metadata supports mapping back to the raw scale.
  for (Eigen::Index j = 1; j <= 3; ++j) {
    const auto& c = d.columns[static_cast<std::size_t>(j)];
    CHECK(std::fabs(d.m(0, j) * c.scale + c.center - x(0, j - 1)) <= 1e-12);
  }
}

TEST_CASE("constant columns are dropped with a record") {
  Eigen::MatrixXd x(5, 2);
  x.col(0).setConstant(3.0);
  x.col(1) << 1, 2, 3, 4, 5;
  const DesignMatrix d = build_design(x, {"fixed", "live"}, {DesignTerms::MainEffects, true, 0});
  CHECK(d.cols() == 2);
  REQUIRE(d.dropped.size() == 1);
  CHECK(d.dropped[0] == "fixed (constant)");
  CHECK_THROWS(build_design(Eigen::MatrixXd(0, 2), {"a", "b"}, DesignSpec{}));
}

TEST_CASE("sparse interactions are filtered at the stated count") {
  // 75 indicator covariates over 5735 rows, engineered so that exactly 1780
  // pairwise products carry at least 46 nonzero entries: 60 nested dense
  // columns (all pairs kept), one mid column overlapping 10 of them, and 14
  // rare columns with pairwise-disjoint support.
  const Eigen::Index n = 5735;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 75);
  std::vector<std::string> names;
  for (int j = 0; j < 60; ++j) {
    for (Eigen::Index i = 0; i < 2000 + 10 * j; ++i) x(i, j) = 1.0;
    names.push_back("d" + std::to_string(j));
  }
  for (Eigen::Index i = 2450; i < 2496; ++i) x(i, 60) = 1.0;
  names.push_back("mid");
  for (int k = 0; k < 14; ++k) {
    for (Eigen::Index i = 3000 + 40 * k; i < 3000 + 40 * k + 40; ++i) x(i, 61 + k) = 1.0;
    names.push_back("r" + std::to_string(k));
  }

  const DesignMatrix d =
      build_design(x, names, {DesignTerms::MainPlusInteractions, true, 46});
  CHECK(d.cols() == 1856);  // intercept + 75 main + 1780 surviving products
}
