#include <doctest.h>

#include <cmath>

#include "emsm/bounds.hpp"
#include "emsm/rng.hpp"
#include "test_support.hpp"

using namespace emsm;

namespace {

SensitivityParams msm_params(double l1, double l2) {
  return {l1, l2, OutcomeSpec::msm()};
}

ConditionalSummary bernoulli_summary(double p1, double p0, double pi,
                                     const SensitivityParams& params) {
  return ConditionalSummary::from_distributions(bernoulli_dist(p1), bernoulli_dist(p0), pi,
                                                params);
}

}  // namespace

TEST_CASE("binary quantile losses against exhaustive computation") {
  const auto [ltau, l1mtau] = binary_quantile_losses(2.0 / 3.0, 0.7);
  CHECK(ltau == doctest::Approx(0.1));
  CHECK(l1mtau == doctest::Approx(0.2));

  // Independent route: optimized losses of the two-point distribution.
  const DiscreteDistribution d = bernoulli_dist(0.7);
  CHECK(ltau == doctest::Approx(d.optimized_quantile_loss(2.0 / 3.0)));
  CHECK(l1mtau == doctest::Approx(d.optimized_quantile_loss(1.0 / 3.0)));

  const auto [z1, z2] = binary_quantile_losses(0.4, 0.0);
  CHECK(z1 == 0.0);
  CHECK(z2 == 0.0);
  const auto [h1, h2] = binary_quantile_losses(0.5, 0.5);
  CHECK(h1 == doctest::Approx(0.25));
  CHECK(h2 == doctest::Approx(0.25));

  Rng rng(5);
  for (int rep = 0; rep < 500; ++rep) {
    const double tau = rng.uniform01();
    const double p = rng.uniform01();
    const auto [a, b] = binary_quantile_losses(tau, p);
    const DiscreteDistribution bd = bernoulli_dist(p);
    CHECK(a == doctest::Approx(bd.optimized_quantile_loss(tau)).epsilon(1e-12));
    CHECK(b == doctest::Approx(bd.optimized_quantile_loss(1.0 - tau)).epsilon(1e-12));
  }
}

TEST_CASE("conditional bounds, shrinkage and degenerate cases") {
  const SensitivityParams params = msm_params(0.5, 2.0);
  const ConditionalSummary s = bernoulli_summary(0.7, 0.4, 0.5, params);
  const BoundResult b = emsm_conditional_bounds(params, s);
  CHECK(b.psi_plus == 1.0);
  CHECK(b.nu_upper == doctest::Approx(0.85));
  CHECK(b.nu_lower == doctest::Approx(0.7 - 1.5 * 0.2));

  // Shrinkage 0.5 halves the add-on.
  const SensitivityParams half(0.5, 2.0, OutcomeSpec::recommended(0.5));
  const BoundResult bh = emsm_conditional_bounds(half, bernoulli_summary(0.7, 0.4, 0.5, half));
  CHECK(bh.psi_plus == doctest::Approx(0.5));
  CHECK(bh.nu_upper == doctest::Approx(0.775));

  // Zero shrinkage pins both bounds at the identified value.
  const SensitivityParams zero(0.5, 2.0, OutcomeSpec::recommended(0.0));
  const BoundResult bz = emsm_conditional_bounds(zero, bernoulli_summary(0.7, 0.4, 0.5, zero));
  CHECK(bz.nu_upper == doctest::Approx(0.7));
  CHECK(bz.nu_lower == doctest::Approx(0.7));
}

TEST_CASE("binary stratum bounds") {
  const BoundResult b = emsm_binary_bounds(0.7, 0.5, msm_params(0.5, 2.0));
  CHECK(b.mu_upper == doctest::Approx(0.775));
  CHECK(b.mu_lower == doctest::Approx(0.55));

  const BoundResult u = emsm_binary_bounds(0.7, 0.5, msm_params(1.0, 1.0));
  CHECK(u.mu_upper == doctest::Approx(0.7));
  CHECK(u.mu_lower == doctest::Approx(0.7));

  const BoundResult z = emsm_binary_bounds(0.0, 0.3, msm_params(0.5, 2.0));
  CHECK(z.mu_upper == 0.0);
  CHECK(z.mu_lower == 0.0);
}

TEST_CASE("specification collapses to the unrestricted and identified cases") {
  Rng rng(99);
  for (int rep = 0; rep < 400; ++rep) {
    const DiscreteDistribution d = testing::random_distribution(rng);
    const double lambda = 1.0 + 3.0 * rng.uniform01();
    const SensitivityParams msm = SensitivityParams::symmetric(lambda, OutcomeSpec::msm());
    const SensitivityParams one =
        SensitivityParams::symmetric(lambda, OutcomeSpec::recommended(1.0));
    const SensitivityParams nil =
        SensitivityParams::symmetric(lambda, OutcomeSpec::recommended(0.0));
    const ConditionalSummary s =
        ConditionalSummary::from_distributions(d, d, 0.4, msm);
    const BoundResult bm = emsm_conditional_bounds(msm, s);
    const BoundResult b1 = emsm_conditional_bounds(one, s);
    const BoundResult b0 = emsm_conditional_bounds(nil, s);
    CHECK(std::fabs(b1.nu_upper - bm.nu_upper) <= 1e-12 * std::max(1.0, std::fabs(bm.nu_upper)));
    CHECK(std::fabs(b1.nu_lower - bm.nu_lower) <= 1e-12 * std::max(1.0, std::fabs(bm.nu_lower)));
    CHECK(b0.nu_upper == doctest::Approx(d.mean()).epsilon(1e-13));
    CHECK(b0.nu_lower == doctest::Approx(d.mean()).epsilon(1e-13));
  }
}

TEST_CASE("monotonicity in each knob") {
  Rng rng(123);
  for (int rep = 0; rep < 200; ++rep) {
    const DiscreteDistribution d = testing::random_distribution(rng);
    const double l1 = rng.uniform(0.1, 1.0);
    const double l2 = 1.0 + rng.uniform(0.0, 3.0);
    const double base_d1 = rng.uniform(0.0, 1.0);
    const double base_d2 = rng.uniform(0.0, 1.0);

    auto upper = [&](double lam2, double dd1, double dd2) {
      const SensitivityParams p(l1, lam2, OutcomeSpec::explicit_deltas(dd1, dd2));
      const ConditionalSummary s = ConditionalSummary::from_distributions(d, d, 0.5, p);
      return emsm_conditional_bounds(p, s);
    };
    const BoundResult base = upper(l2, base_d1, base_d2);
    const BoundResult wider_l = upper(l2 + 0.7, base_d1, base_d2);
    const BoundResult wider_d1 = upper(l2, base_d1 + 0.5, base_d2);
    const BoundResult wider_d2 = upper(l2, base_d1, base_d2 + 0.5);
    CHECK(wider_l.nu_upper >= base.nu_upper - 1e-12);
    CHECK(wider_l.nu_lower <= base.nu_lower + 1e-12);
    CHECK(wider_d1.nu_upper >= base.nu_upper - 1e-12);
    CHECK(wider_d2.nu_upper >= base.nu_upper - 1e-12);
    CHECK(wider_d1.nu_lower <= base.nu_lower + 1e-12);
    CHECK(wider_d2.nu_lower <= base.nu_lower + 1e-12);

    // Shrinkage knob.
    const double delta = rng.uniform01();
    auto at_delta = [&](double dd) {
      const SensitivityParams p(l1, l2, OutcomeSpec::recommended(dd));
      const ConditionalSummary s = ConditionalSummary::from_distributions(d, d, 0.5, p);
      return emsm_conditional_bounds(p, s);
    };
    const double delta_hi = delta + (1.0 - delta) * rng.uniform01();
    CHECK(at_delta(delta_hi).nu_upper >= at_delta(delta).nu_upper - 1e-12);
    CHECK(at_delta(delta_hi).nu_lower <= at_delta(delta).nu_lower + 1e-12);
  }
}

TEST_CASE("quantile-loss ratio inequality on random distributions") {
  Rng rng(2024);
  for (int rep = 0; rep < 2000; ++rep) {
    const DiscreteDistribution d = testing::random_distribution(rng, 10, rep % 2 == 0);
    const double tau = 0.5 + 0.5 * rng.uniform01();
    const double lt = d.optimized_quantile_loss(tau);
    const double lm = d.optimized_quantile_loss(1.0 - tau);
    const double ratio = (lt == 0.0 && lm == 0.0) ? 1.0 : lm / lt;
    const double hi = tau / (1.0 - tau);
    const double lo = 1.0 / hi;
    CHECK(ratio >= lo * (1.0 - 1e-12) - 1e-15);
    CHECK(ratio <= hi * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("worst-case construction on the two-point example") {
  const SensitivityParams params = msm_params(0.5, 2.0);
  const WorstCaseConstruction w = worst_case_construction(params, bernoulli_dist(0.7));
  CHECK(w.u1_prob_t1 == doctest::Approx(1.0 / 3.0));
  CHECK(w.q_star == 1.0);
  CHECK(w.probs_u1[1] == doctest::Approx(1.0));   // all mass at 1 given U=1
  CHECK(w.probs_u1[0] == doctest::Approx(0.0));
  CHECK(w.probs_u0[1] == doctest::Approx(0.55));
  CHECK(w.probs_u0[0] == doctest::Approx(0.45));
  CHECK(w.eta_u1 == doctest::Approx(1.0));
  CHECK(w.eta_u0 == doctest::Approx(0.55));
  CHECK(w.attained_bound == doctest::Approx(0.85));
}

TEST_CASE("worst-case construction three-point atom arithmetic") {
  const SensitivityParams params = msm_params(0.5, 2.0);
  const DiscreteDistribution d({1.0, 2.0, 3.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  const WorstCaseConstruction w = worst_case_construction(params, d);
  CHECK(w.q_star == 2.0);
  CHECK(w.probs_u1[2] == doctest::Approx(1.0));  // (1 + 2*1) * 1/3
  CHECK(w.probs_u1[1] == doctest::Approx(0.0));  // atom collapses
  CHECK(w.probs_u1[0] == doctest::Approx(0.0));
}

TEST_CASE("worst-case construction properties on random instances") {
  Rng rng(31);
  for (int rep = 0; rep < 400; ++rep) {
    const DiscreteDistribution d = testing::random_distribution(rng);
    const double lambda = 1.0 + 2.5 * rng.uniform01();
    OutcomeSpec spec = OutcomeSpec::msm();
    const double pick = rng.uniform01();
    if (pick < 0.4)
      spec = OutcomeSpec::recommended(rng.uniform01());
    else if (pick < 0.7)
      spec = OutcomeSpec::explicit_deltas(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
    const SensitivityParams params(1.0 / lambda, lambda, spec);
    const WorstCaseConstruction w = worst_case_construction(params, d);

    double sum1 = 0.0, sum0 = 0.0, mix_mean = 0.0, lambda_mean = 0.0;
    for (std::size_t i = 0; i < w.support.size(); ++i) {
      CHECK(w.probs_u1[i] >= -1e-15);
      CHECK(w.probs_u0[i] >= -1e-15);
      sum1 += w.probs_u1[i];
      sum0 += w.probs_u0[i];
    }
    CHECK(std::fabs(sum1 - 1.0) <= 1e-12);
    CHECK(std::fabs(sum0 - 1.0) <= 1e-12);
    lambda_mean = w.lambda_u1 * w.u1_prob_t1 + w.lambda_u0 * (1.0 - w.u1_prob_t1);
    CHECK(lambda_mean == doctest::Approx(1.0).epsilon(1e-14));
    mix_mean = w.eta_u1 * w.u1_prob_t1 + w.eta_u0 * (1.0 - w.u1_prob_t1);
    CHECK(std::fabs(mix_mean - d.mean()) <= 1e-10);

    const ConditionalSummary s = ConditionalSummary::from_distributions(d, d, 0.5, params);
    const BoundResult b = emsm_conditional_bounds(params, s);
    CHECK(std::fabs(w.attained_bound - b.nu_upper) <= 1e-10 * std::max(1.0, std::fabs(b.nu_upper)));
  }
}

TEST_CASE("threshold-indexed upper bound and its minimum") {
  const SensitivityParams params = msm_params(0.5, 2.0);
  const DiscreteDistribution d = bernoulli_dist(0.7);
  const ConditionalSummary s = ConditionalSummary::from_distributions(d, d, 0.5, params);
  const BoundResult sharp = emsm_conditional_bounds(params, s);

  CHECK(dual_bound_at_q(params, 1.0, d) == doctest::Approx(sharp.nu_upper));
  CHECK(dual_bound_at_q(params, 0.0, d) == doctest::Approx(1.4));

  double best = kInf;
  double best_q = 0.0;
  for (double q : {0.0, 0.5, 1.0}) {
    const double v = dual_bound_at_q(params, q, d);
    CHECK(v >= sharp.nu_upper - 1e-12);
    if (v < best) {
      best = v;
      best_q = q;
    }
  }
  CHECK(best_q == 1.0);
}

TEST_CASE("stratum aggregation") {
  std::vector<StratumBounds> strata(2);
  strata[0] = {0.5, 0.5, 0.7, 0.0, 0.8, 0.6, 0.0, 0.0};
  strata[1] = {0.5, 0.5, 0.7, 0.0, 0.9, 0.6, 0.0, 0.0};
  const PopulationBounds b = aggregate_mu(strata);
  CHECK(b.mu1_upper == doctest::Approx(0.775));
  CHECK(b.ate_upper == doctest::Approx(b.mu1_upper - b.mu0_lower));

  strata[1].weight = 0.6;
  CHECK_THROWS(aggregate_mu(strata));
}

TEST_CASE("diagnostic lower bound under the upper-side specification") {
  const SensitivityParams params(0.5, 2.0, OutcomeSpec::recommended(0.5));
  const ArmSummary arm = ArmSummary::from_distribution(bernoulli_dist(0.7), params.tau());
  const double diag = relaxed_lower_bound_upper_spec(params, arm);
  // mean - gap*delta*(1-tau)/tau*loss = 0.7 - 1.5*0.5*0.5*0.1
  CHECK(diag == doctest::Approx(0.7 - 1.5 * 0.5 * 0.05));
  const ConditionalSummary s =
      ConditionalSummary::from_distributions(bernoulli_dist(0.7), bernoulli_dist(0.4), 0.5,
                                             params);
  CHECK(diag >= emsm_conditional_bounds(params, s).nu_lower - 1e-12);
}
