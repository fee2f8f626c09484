#include "emsm/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "emsm/fit.hpp"
#include "emsm/rng.hpp"

namespace emsm {

SyntheticDgp make_binary_dgp(DgpFlavor flavor, double lambda, double delta, std::size_t n) {
  SyntheticDgp dgp;
  dgp.n = n;
  dgp.covariate_names = {"x1", "x2"};
  dgp.params = SensitivityParams::symmetric(lambda, OutcomeSpec::recommended(delta));

  const bool pi_interaction = flavor == DgpFlavor::PropensityMisspecified;
  const bool mean_interaction = flavor != DgpFlavor::PropensityMisspecified;
  for (int x1 = 0; x1 <= 1; ++x1) {
    for (int x2 = 0; x2 <= 1; ++x2) {
      StratumSpec s;
      s.weight = 0.25;
      s.x = {static_cast<double>(x1), static_cast<double>(x2)};
      if (pi_interaction)
        s.propensity = logistic(-0.3 + 0.5 * x1 + 0.4 * x2 - 1.4 * x1 * x2);
      else
        s.propensity = logistic(-0.2 + 0.45 * x1 + 0.35 * x2);
      double p1, p0;
      if (mean_interaction) {
        p1 = 0.50 + 0.22 * x1 + 0.18 * x2 - 0.45 * x1 * x2;
        p0 = 0.40 + 0.02 * x1 + 0.04 * x2;
      } else {
        p1 = 0.55 + 0.15 * x1 + 0.10 * x2;
        p0 = 0.35 + 0.10 * x1 + 0.05 * x2;
      }
      s.y_treated = bernoulli_dist(p1);
      s.y_control = bernoulli_dist(p0);
      dgp.strata.push_back(std::move(s));
    }
  }
  return dgp;
}

SyntheticTruth dgp_truth(const SyntheticDgp& dgp) {
  SyntheticTruth truth;
  std::vector<StratumBounds> sb;
  for (const auto& s : dgp.strata) {
    const ConditionalSummary cs =
        ConditionalSummary::from_distributions(s.y_treated, s.y_control, s.propensity, dgp.params);
    StratumTruth st;
    st.treated = emsm_conditional_bounds(dgp.params, cs);
    st.control = emsm_conditional_bounds0(dgp.params, cs);
    st.psi_plus = st.treated.psi_plus;
    st.psi_minus = st.treated.psi_minus;
    truth.strata.push_back(st);
    truth.mu1_identified += s.weight * cs.treated.cond_mean;
    truth.mu0_identified += s.weight * cs.control.cond_mean;
    sb.push_back({s.weight, s.propensity, cs.treated.cond_mean, cs.control.cond_mean,
                  st.treated.nu_upper, st.treated.nu_lower, st.control.nu_upper,
                  st.control.nu_lower});
  }
  truth.bounds = aggregate_mu(sb);
  return truth;
}

void verify_dgp_constraints(const SyntheticDgp& dgp, double tol) {
  double total = 0.0;
  for (const auto& s : dgp.strata) {
    total += s.weight;
    if (!(s.propensity > 0.0 && s.propensity < 1.0))
      throw std::invalid_argument("verify_dgp_constraints: propensity outside (0,1)");
    const WorstCaseConstruction w = worst_case_construction(dgp.params, s.y_treated);
    double sum1 = 0.0, sum0 = 0.0;
    for (std::size_t i = 0; i < w.support.size(); ++i) {
      if (w.probs_u1[i] < -tol || w.probs_u0[i] < -tol)
        throw std::logic_error("verify_dgp_constraints: negative re-mixed mass");
      sum1 += w.probs_u1[i];
      sum0 += w.probs_u0[i];
    }
    if (std::fabs(sum1 - 1.0) > 1e-12 || std::fabs(sum0 - 1.0) > 1e-12)
      throw std::logic_error("verify_dgp_constraints: re-mixed law not normalized");
    if (w.lambda_u0 < dgp.params.lambda1 - tol || w.lambda_u1 > dgp.params.lambda2 + tol)
      throw std::logic_error("verify_dgp_constraints: density ratio outside range");
    const double mean = s.y_treated.mean();
    const double tau = dgp.params.tau();
    const ArmSummary arm = ArmSummary::from_distribution(s.y_treated, tau);
    const auto [d1, d2] =
        resolve_deltas(dgp.params.outcome, tau, arm.qloss_tau, arm.qloss_one_minus_tau);
    if (w.eta_u1 - mean > d2 + tol || mean - w.eta_u0 > d1 + tol)
      throw std::logic_error("verify_dgp_constraints: mean shift outside range");
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("verify_dgp_constraints: stratum weights must sum to 1");
}

Dataset generate_synthetic(const SyntheticDgp& dgp, std::uint64_t seed) {
  verify_dgp_constraints(dgp);
  Rng rng(derive_seed(seed, 0x5a11u));

  std::vector<double> cum;
  double acc = 0.0;
  for (const auto& s : dgp.strata) {
    acc += s.weight;
    cum.push_back(acc);
  }

  Dataset d;
  const std::size_t n = dgp.n;
  const std::size_t dim = dgp.covariate_names.size();
  d.y.resize(static_cast<Eigen::Index>(n));
  d.t.resize(n);
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  d.covariate_names = dgp.covariate_names;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.categorical(cum);
    const StratumSpec& s = dgp.strata[k];
    for (std::size_t j = 0; j < dim; ++j)
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.x[j];
    const bool treated = rng.bernoulli(s.propensity);
    d.t[i] = treated ? 1 : 0;
    const DiscreteDistribution& dist = treated ? s.y_treated : s.y_control;
    std::vector<double> ycum;
    double a = 0.0;
    for (double p : dist.probs()) {
      a += p;
      ycum.push_back(a);
    }
    d.y(static_cast<Eigen::Index>(i)) = dist.support()[rng.categorical(ycum)];
  }
  return d;
}

double exact_phi_mean(const SyntheticDgp& dgp, BoundSide side, Arm arm,
                      std::span<const double> pi_x, std::span<const double> q_x,
                      std::span<const double> m_x) {
  if (pi_x.size() != dgp.strata.size() || q_x.size() != dgp.strata.size() ||
      m_x.size() != dgp.strata.size())
    throw std::invalid_argument("exact_phi_mean: table length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < dgp.strata.size(); ++k) {
    const StratumSpec& s = dgp.strata[k];
    double e_treated = 0.0, e_control = 0.0;
    for (std::size_t i = 0; i < s.y_treated.size(); ++i)
      e_treated += s.y_treated.probs()[i] * phi_eval(side, arm, s.y_treated.support()[i], 1,
                                                     pi_x[k], q_x[k], m_x[k], dgp.params);
    for (std::size_t i = 0; i < s.y_control.size(); ++i)
      e_control += s.y_control.probs()[i] * phi_eval(side, arm, s.y_control.support()[i], 0,
                                                     pi_x[k], q_x[k], m_x[k], dgp.params);
    total += s.weight * (s.propensity * e_treated + (1.0 - s.propensity) * e_control);
  }
  return total;
}

std::vector<double> exact_mean_model(const SyntheticDgp& dgp, BoundSide side, Arm arm,
                                     std::span<const double> q_x) {
  std::vector<double> m(dgp.strata.size());
  for (std::size_t k = 0; k < dgp.strata.size(); ++k) {
    const DiscreteDistribution& dist =
        arm == Arm::Treated ? dgp.strata[k].y_treated : dgp.strata[k].y_control;
    double e = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i)
      e += dist.probs()[i] *
           transformed_response(side, arm, dist.support()[i], q_x[k], dgp.params);
    m[k] = e;
  }
  return m;
}

double exact_mu_bound_at_q(const SyntheticDgp& dgp, BoundSide side, Arm arm,
                           std::span<const double> q_x) {
  const std::vector<double> m = exact_mean_model(dgp, side, arm, q_x);
  double total = 0.0;
  for (std::size_t k = 0; k < dgp.strata.size(); ++k) {
    const StratumSpec& s = dgp.strata[k];
    const DiscreteDistribution& own = arm == Arm::Treated ? s.y_treated : s.y_control;
    const double p_own = arm == Arm::Treated ? s.propensity : 1.0 - s.propensity;
    total += s.weight * (p_own * own.mean() + (1.0 - p_own) * m[k]);
  }
  return total;
}

}  // namespace emsm
