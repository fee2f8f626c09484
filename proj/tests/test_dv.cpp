#include <doctest.h>

#include <cmath>

#include "emsm/bounds.hpp"
#include "emsm/dv.hpp"

using namespace emsm;

TEST_CASE("bounding factor") {
  CHECK(bounding_factor(2.0, 4.0) == doctest::Approx(1.6));
  CHECK(bounding_factor(1.0, 7.0) == 1.0);
  CHECK(bounding_factor(3.0, 1.0) == 1.0);
  CHECK(bounding_factor(kInf, 4.0) == 4.0);
  CHECK(bounding_factor(2.0, kInf) == 2.0);
  CHECK_THROWS(bounding_factor(0.5, 2.0));

  // Nondecreasing in each argument.
  for (double x : {1.0, 1.5, 3.0})
    for (double y : {1.0, 2.0, 6.0}) {
      CHECK(bounding_factor(x + 0.5, y) >= bounding_factor(x, y));
      CHECK(bounding_factor(x, y + 0.5) >= bounding_factor(x, y));
    }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS(DvParams(0.9, 0.5, 2.0));
  CHECK_THROWS(DvParams(2.0, 1.5, 2.0));
  CHECK_THROWS(BinaryStratum(1.2, 0.5, 0.5));
  CHECK_THROWS(BinaryStratum(0.5, 0.5, 0.0));
  CHECK_NOTHROW(DvParams(kInf, 0.5, 2.0));
}

TEST_CASE("original bounding-factor bounds") {
  const BinaryStratum s(0.7, 0.5, 0.5);
  const DvParams p(4.0, 0.5, 2.0);
  const DvBounds b = dv_original_bounds(s, p);
  CHECK(b.mu1_upper == doctest::Approx(0.7 * (0.5 + 0.5 * 1.6)));  // 0.91
  CHECK(b.crr.upper == doctest::Approx(1.4 * 1.6));

  const DvBounds unit = dv_original_bounds(s, DvParams(1.0, 0.5, 2.0));
  CHECK(unit.mu1_upper == doctest::Approx(0.7));
  const DvBounds lam1 = dv_original_bounds(s, DvParams(4.0, 1.0, 1.0));
  CHECK(lam1.mu1_upper == doctest::Approx(0.7));

  CHECK_THROWS(dv_original_bounds(BinaryStratum(0.7, 0.0, 0.5), p));
}

TEST_CASE("improved bounds with the min clip") {
  const BinaryStratum s(0.7, 0.5, 0.5);
  const DvParams p(4.0, 0.5, 2.0);
  const DvBounds b = sjolander_bounds(s, p);
  CHECK(b.mu1_upper == doctest::Approx(0.7 * (0.5 + 0.5 / 0.7)));  // 0.85
  CHECK(b.mu1_lower == doctest::Approx(dv_original_bounds(s, p).mu1_lower));

  // When the clip is inactive the two families coincide.
  const DvParams mild(1.2, 0.5, 2.0);
  CHECK(sjolander_bounds(s, mild).mu1_upper ==
        doctest::Approx(dv_original_bounds(s, mild).mu1_upper));
}

TEST_CASE("sharp bounds under the joint constraints") {
  const BinaryStratum s(0.7, 0.5, 0.5);
  {
    const DvSharpBounds b = dv_sharp_bounds(s, DvParams(4.0, 0.5, 2.0));
    CHECK(b.mu1_upper == doctest::Approx(0.775));
  }
  {
    const DvSharpBounds b = dv_sharp_bounds(s, DvParams(1.5, 0.5, 2.0));
    CHECK(b.mu1_upper == doctest::Approx(0.75));
  }
  {
    // lambda1 -> 0 recovers the improved upper bound.
    const DvParams p(4.0, 0.0, 2.0);
    const DvSharpBounds b = dv_sharp_bounds(s, p);
    const DvBounds sj = sjolander_bounds(s, p);
    CHECK(std::fabs(b.mu1_upper - sj.mu1_upper) <= 1e-10);
  }
}

TEST_CASE("sharp bounds are attained by the reported mean shifts") {
  for (double p1 : {0.1, 0.35, 0.7, 0.9}) {
    for (double lambda : {1.2, 1.5, 2.0, 3.0}) {
      for (double theta : {1.0, 1.3, 2.0, 4.0, 9.0}) {
        const BinaryStratum s(p1, 0.4, 0.45);
        const DvParams p(theta, 1.0 / lambda, lambda);
        const DvSharpBounds b = dv_sharp_bounds(s, p);
        const SensitivityParams up(1.0 / lambda, lambda,
                                   OutcomeSpec::explicit_deltas(b.delta1_upper, b.delta2_upper));
        const SensitivityParams lo(1.0 / lambda, lambda,
                                   OutcomeSpec::explicit_deltas(b.delta1_lower, b.delta2_lower));
        CHECK(std::fabs(emsm_binary_bounds(p1, 0.55, up).mu_upper - b.mu1_upper) <= 1e-12);
        CHECK(std::fabs(emsm_binary_bounds(p1, 0.55, lo).mu_lower - b.mu1_lower) <= 1e-12);

        // Compatibility of the attaining shifts with the ratio constraint.
        auto theta_of = [&](double d1, double d2) {
          const double den = std::max(p1 - d1, 0.0);
          return den == 0.0 ? kInf : std::min(p1 + d2, 1.0) / den;
        };
        CHECK(theta_of(b.delta1_upper, b.delta2_upper) <= theta * (1.0 + 1e-10));
      }
    }
  }
}

TEST_CASE("bound family ordering over a parameter grid") {
  for (int ip = 1; ip <= 20; ++ip) {
    const double p1 = ip / 21.0;
    for (double lambda : {1.1, 1.2, 1.5, 2.0, 3.0, 5.0}) {
      for (double theta : {1.0, 1.3, 1.8, 2.5, 4.0, 10.0}) {
        const BinaryStratum s(p1, 0.5, 0.5);
        const DvParams p(theta, 1.0 / lambda, lambda);
        const DvBounds original = dv_original_bounds(s, p);
        const DvBounds improved = sjolander_bounds(s, p);
        const DvSharpBounds sharp = dv_sharp_bounds(s, p);
        CHECK(sharp.mu1_upper <= improved.mu1_upper + 1e-12);
        CHECK(improved.mu1_upper <= original.mu1_upper + 1e-12);
        CHECK(sharp.mu1_lower >= improved.mu1_lower - 1e-12);
        CHECK(improved.mu1_lower >= original.mu1_lower - 1e-12);
        CHECK(sharp.mu0_upper <= improved.mu0_upper + 1e-12);
        CHECK(sharp.mu0_lower >= improved.mu0_lower - 1e-12);
      }
    }
  }
}

TEST_CASE("theta implied by the shrinkage knob") {
  CHECK(theta_from_delta(0.5, 2.0 / 3.0, 0.2, BoundSide::Upper) == doctest::Approx(4.0));
  CHECK(theta_from_delta(0.5, 2.0 / 3.0, 0.7, BoundSide::Upper) == doctest::Approx(1.36));
  CHECK(theta_from_delta(0.0, 0.6, 0.3, BoundSide::Upper) == 1.0);

  // Envelope property with equality for small p1.
  for (double tau : {0.5, 0.6, 2.0 / 3.0, 0.75}) {
    for (double delta : {0.1, 0.4, 0.8}) {
      const auto [tp, tm] = theta_plus_minus(delta, tau);
      CHECK(tp >= tm - 1e-12);
      for (double p1 : {0.05, 0.2, 0.5, 0.8, 0.95}) {
        const double t = theta_from_delta(delta, tau, p1, BoundSide::Upper);
        CHECK(t <= tp * (1.0 + 1e-12));
        if (p1 <= std::min(tau, 1.0 - tau))
          CHECK(t == doctest::Approx(tp).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("data-independent theta envelope table") {
  struct Cell {
    double delta, lambda, expected;
  };
  const Cell cells[] = {
      {0.2, 1.0, 1.5},  {0.2, 1.2, 1.55}, {0.2, 1.5, 1.625}, {0.2, 2.0, 1.75},
      {0.5, 1.0, 3.0},  {0.5, 1.2, 3.2},  {0.5, 1.5, 3.5},   {0.5, 2.0, 4.0},
      {0.8, 1.0, 9.0},  {0.8, 1.2, 9.8},  {0.8, 1.5, 11.0},  {0.8, 2.0, 13.0},
  };
  for (const auto& c : cells) {
    const double tau = c.lambda / (c.lambda + 1.0);
    CHECK(theta_plus_minus(c.delta, tau).first == doctest::Approx(c.expected).epsilon(1e-12));
  }
  const double tau2 = 2.0 / 3.0;
  CHECK(std::isinf(theta_plus_minus(1.0, tau2).first));
}

TEST_CASE("aligned theta grid drops sub-1 entries") {
  const double tau = 0.5;  // lambda = 1
  const auto grid = aligned_theta_grid(0.2, tau);
  // theta+ = 1.5: the half point 0.75 falls below 1 and is dropped.
  REQUIRE(grid.size() == 2);
  CHECK(grid[0] == doctest::Approx(1.5));
  CHECK(grid[1] == doctest::Approx(2.25));
  const auto grid1 = aligned_theta_grid(1.0, tau);
  REQUIRE(grid1.size() == 3);
  CHECK(std::isinf(grid1[0]));
}

TEST_CASE("difference-constraint bounds") {
  const SensitivityParams lam(0.5, 2.0, OutcomeSpec::msm());
  const ArmSummary arm = ArmSummary::from_distribution(bernoulli_dist(0.7), lam.tau());

  const BoundResult zero = dmsm_bounds(0.0, arm, 0.5, lam);
  CHECK(zero.nu_upper == doctest::Approx(0.7));
  CHECK(zero.nu_lower == doctest::Approx(0.7));

  const BoundResult b = dmsm_bounds(0.45, arm, 0.5, lam);
  CHECK(b.nu_upper == doctest::Approx(0.85));  // tau(1-tau)*0.45 = 0.1 = loss

  const BoundResult inf_case = dmsm_bounds(kInf, arm, 0.5, lam);
  const ConditionalSummary s =
      ConditionalSummary::from_distributions(bernoulli_dist(0.7), bernoulli_dist(0.4), 0.5, lam);
  const BoundResult msm = emsm_conditional_bounds(lam, s);
  CHECK(inf_case.nu_upper == doctest::Approx(msm.nu_upper));
  CHECK(inf_case.nu_lower == doctest::Approx(msm.nu_lower));
}

TEST_CASE("difference constraint equals the two-sided split") {
  for (double p1 : {0.2, 0.55, 0.8}) {
    for (double lambda : {1.3, 2.0, 4.0}) {
      for (double total : {0.0, 0.1, 0.4, 2.0}) {
        const SensitivityParams lam(1.0 / lambda, lambda, OutcomeSpec::msm());
        const double tau = lam.tau();
        const ArmSummary arm = ArmSummary::from_distribution(bernoulli_dist(p1), tau);
        const BoundResult d = dmsm_bounds(total, arm, 0.5, lam);
        const SensitivityParams up(
            1.0 / lambda, lambda,
            OutcomeSpec::explicit_deltas((1.0 - tau) * total, tau * total));
        const SensitivityParams lo(
            1.0 / lambda, lambda,
            OutcomeSpec::explicit_deltas(tau * total, (1.0 - tau) * total));
        CHECK(std::fabs(d.mu_upper - emsm_binary_bounds(p1, 0.5, up).mu_upper) <= 1e-12);
        CHECK(std::fabs(d.mu_lower - emsm_binary_bounds(p1, 0.5, lo).mu_lower) <= 1e-12);
      }
    }
  }
}

TEST_CASE("ratio-constraint bounds") {
  const SensitivityParams lam(0.5, 2.0, OutcomeSpec::msm());
  const ArmSummary arm = ArmSummary::from_distribution(bernoulli_dist(0.7), lam.tau());

  const BoundResult unit = rmsm_bounds(1.0, arm, 0.5, lam);
  CHECK(unit.nu_upper == doctest::Approx(0.7));
  CHECK(unit.nu_lower == doctest::Approx(0.7));

  const BoundResult b = rmsm_bounds(1.5, arm, 0.5, lam);
  CHECK(b.mu_upper == doctest::Approx(0.75));
  const DvSharpBounds sharp =
      dv_sharp_bounds(BinaryStratum(0.7, 0.4, 0.5), DvParams(1.5, 0.5, 2.0));
  CHECK(std::fabs(b.mu_upper - sharp.mu1_upper) <= 1e-12);

  const BoundResult inf_case = rmsm_bounds(kInf, arm, 0.5, lam);
  const ConditionalSummary s =
      ConditionalSummary::from_distributions(bernoulli_dist(0.7), bernoulli_dist(0.4), 0.5, lam);
  CHECK(inf_case.nu_upper == doctest::Approx(emsm_conditional_bounds(lam, s).nu_upper));

  ArmSummary neg = arm;
  neg.cond_mean = -0.2;
  CHECK_THROWS(rmsm_bounds(1.5, neg, 0.5, lam));
}

TEST_CASE("relaxed ratio diagnostic") {
  const BinaryStratum s(0.7, 0.5, 0.5);
  const DvParams p(4.0, 0.5, 2.0);
  const CrrInterval relaxed = dv_relaxed_crr_bounds(s, p);
  CHECK(relaxed.upper == doctest::Approx(1.4 * 9.0 / 6.0));
  // Tighter than the original factor, looser than the sharp ratio.
  const DvBounds original = dv_original_bounds(s, p);
  const DvSharpBounds sharp = dv_sharp_bounds(s, p);
  CHECK(relaxed.upper <= original.crr.upper + 1e-12);
  CHECK(relaxed.upper >= sharp.crr.upper - 1e-12);
}
