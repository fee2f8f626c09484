#include "emsm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emsm {
namespace oracle {

DiscreteInstance::DiscreteInstance(DiscreteDistribution y1, DiscreteDistribution y0,
                                   double prob_t1_, SensitivityParams params_)
    : y_treated(std::move(y1)), y_control(std::move(y0)), prob_t1(prob_t1_),
      params(std::move(params_)) {
  if (!(prob_t1 > 0.0 && prob_t1 < 1.0))
    throw std::invalid_argument("DiscreteInstance: prob_t1 outside (0,1)");
  if (y_treated.size() > 12 || y_control.size() > 12)
    throw std::invalid_argument("DiscreteInstance: support too large for brute force");
}

namespace {

struct Interval {
  double lo, hi;
  bool empty() const { return lo > hi; }
};

Interval intersect(Interval a, Interval b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

// For a fixed slice mass s, the candidate set over (lambda_u1, eta_u1) is a
// product of intervals and the objective is bilinear, so extremes sit at the
// corners.
struct SliceProblem {
  double s;
  Interval lambda1_range;  // feasible lambda(U=1)
  Interval eta1_range;     // feasible eta(U=1)
};

std::optional<SliceProblem> slice_problem(const DiscreteDistribution& dist, double mean,
                                          double s, double l1, double l2, double d1, double d2) {
  SliceProblem sp;
  sp.s = s;
  // lambda(U=0) = (1 - s*lambda(U=1))/(1-s) must stay within [l1, l2].
  sp.lambda1_range = {std::max(l1, (1.0 - (1.0 - s) * l2) / s),
                      std::min(l2, (1.0 - (1.0 - s) * l1) / s)};
  if (sp.lambda1_range.empty()) return std::nullopt;

  // Attainable slice means: a mass-s piece of the observed law has mean in
  // [mean - L_s/s, mean + L_{1-s}/s] with L_c the optimized c-quantile loss.
  const double up = dist.optimized_quantile_loss(1.0 - s) / s;
  const double down = dist.optimized_quantile_loss(s) / s;
  Interval eta1 = {mean - down, mean + up};
  // Range constraint on eta(U=1).
  eta1 = intersect(eta1, {mean - d1, mean + d2});
  // Range constraint on the pinned eta(U=0) = (mean - s*eta1)/(1-s):
  // eta0 - mean = -s/(1-s) * (eta1 - mean) in [-d1, d2].
  const double f = (1.0 - s) / s;
  eta1 = intersect(eta1, {mean - (std::isinf(d2) ? kInf : d2 * f),
                          mean + (std::isinf(d1) ? kInf : d1 * f)});
  if (eta1.empty()) return std::nullopt;
  sp.eta1_range = eta1;
  return sp;
}

Candidate best_for_slice(const SliceProblem& sp, double mean, bool upper) {
  Candidate best;
  bool first = true;
  for (double lam1 : {sp.lambda1_range.lo, sp.lambda1_range.hi}) {
    const double lam0 = (1.0 - sp.s * lam1) / (1.0 - sp.s);
    for (double eta1 : {sp.eta1_range.lo, sp.eta1_range.hi}) {
      const double eta0 = (mean - sp.s * eta1) / (1.0 - sp.s);
      const double obj = sp.s * lam1 * eta1 + (1.0 - sp.s) * lam0 * eta0;
      if (first || (upper ? obj > best.objective : obj < best.objective)) {
        best = {sp.s, lam1, lam0, eta1, eta0, obj};
        first = false;
      }
    }
  }
  return best;
}

}  // namespace

EnumerationResult enumerate_emsm_bound(const DiscreteInstance& instance, int grid_resolution,
                                       bool upper) {
  if (grid_resolution < 50)
    throw std::invalid_argument("enumerate_emsm_bound: grid_resolution must be >= 50");
  const DiscreteDistribution& dist = instance.y_treated;
  const double mean = dist.mean();
  const double l1 = instance.params.lambda1;
  const double l2 = instance.params.lambda2;
  const double tau = instance.params.tau();
  const ArmSummary arm = ArmSummary::from_distribution(dist, tau);
  const auto [d1, d2] = resolve_deltas(instance.params.outcome, tau, arm.qloss_tau,
                                       arm.qloss_one_minus_tau);

  std::vector<double> s_grid;
  s_grid.reserve(grid_resolution + 2);
  for (int k = 1; k <= grid_resolution; ++k)
    s_grid.push_back(static_cast<double>(k) / (grid_resolution + 1));
  if (tau > 0.0 && tau < 1.0) s_grid.push_back(1.0 - tau);
  std::sort(s_grid.begin(), s_grid.end());

  EnumerationResult res;
  res.max_found = mean;  // the trivial confounder U == const
  res.argmax = {0.5, 1.0, 1.0, mean, mean, mean};
  std::vector<double> values;
  values.reserve(s_grid.size());
  for (double s : s_grid) {
    const auto sp = slice_problem(dist, mean, s, l1, l2, d1, d2);
    if (!sp) {
      values.push_back(mean);
      continue;
    }
    const Candidate c = best_for_slice(*sp, mean, upper);
    values.push_back(c.objective);
    if (upper ? c.objective > res.max_found : c.objective < res.max_found) {
      res.max_found = c.objective;
      res.argmax = c;
    }
  }

  // Resolution budget: twice the largest move between adjacent grid values,
  // a data-driven stand-in for the objective's modulus of continuity in s.
  double max_step = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i)
    max_step = std::max(max_step, std::fabs(values[i] - values[i - 1]));
  res.grid_slack = 2.0 * max_step + 1e-9;
  return res;
}

double evaluate_construction_objective(const WorstCaseConstruction& w) {
  double eta1 = 0.0, eta0 = 0.0, total1 = 0.0, total0 = 0.0;
  for (std::size_t i = 0; i < w.support.size(); ++i) {
    eta1 += w.support[i] * w.probs_u1[i];
    eta0 += w.support[i] * w.probs_u0[i];
    total1 += w.probs_u1[i];
    total0 += w.probs_u0[i];
  }
  if (std::fabs(total1 - 1.0) > 1e-9 || std::fabs(total0 - 1.0) > 1e-9)
    throw std::invalid_argument("evaluate_construction_objective: laws are not normalized");
  const double s = w.u1_prob_t1;
  return s * w.lambda_u1 * eta1 + (1.0 - s) * w.lambda_u0 * eta0;
}

DvEnumerationResult enumerate_dv_bound(double p1, double prob_t0, double lambda1, double lambda2,
                                       double theta, int grid_resolution) {
  if (grid_resolution < 50)
    throw std::invalid_argument("enumerate_dv_bound: grid_resolution must be >= 50");
  auto theta_of = [&](double dd1, double dd2) {
    const double num = std::min(p1 + dd2, 1.0);
    const double den = std::max(p1 - dd1, 0.0);
    if (den == 0.0) return kInf;
    return num / den;
  };

  DvEnumerationResult res;
  bool first = true;
  std::vector<double> row_max(grid_resolution + 1, -kInf);
  std::vector<double> row_min(grid_resolution + 1, kInf);
  const double d1_hi = p1;
  const double d2_hi = 1.0 - p1;
  for (int i = 0; i <= grid_resolution; ++i) {
    const double dd1 = d1_hi * i / grid_resolution;
    for (int j = 0; j <= grid_resolution; ++j) {
      const double dd2 = d2_hi * j / grid_resolution;
      if (theta_of(dd1, dd2) > theta * (1.0 + 1e-12)) continue;
      const SensitivityParams p(lambda1, lambda2, OutcomeSpec::explicit_deltas(dd1, dd2));
      const BoundResult b = emsm_binary_bounds(p1, prob_t0, p);
      row_max[i] = std::max(row_max[i], b.mu_upper);
      row_min[i] = std::min(row_min[i], b.mu_lower);
      if (first || b.mu_upper > res.max_found) {
        res.max_found = b.mu_upper;
        res.argmax_delta1 = dd1;
        res.argmax_delta2 = dd2;
      }
      if (first || b.mu_lower < res.min_found) {
        res.min_found = b.mu_lower;
        res.argmin_delta1 = dd1;
        res.argmin_delta2 = dd2;
      }
      first = false;
    }
  }
  if (first) throw std::logic_error("enumerate_dv_bound: empty feasible set");

  double max_step = 0.0;
  for (int i = 1; i <= grid_resolution; ++i) {
    if (std::isfinite(row_max[i]) && std::isfinite(row_max[i - 1]))
      max_step = std::max(max_step, std::fabs(row_max[i] - row_max[i - 1]));
    if (std::isfinite(row_min[i]) && std::isfinite(row_min[i - 1]))
      max_step = std::max(max_step, std::fabs(row_min[i] - row_min[i - 1]));
  }
  // 2/resolution times the objective's Lipschitz bound over the search box,
  // which also covers the quantization against the constraint boundary.
  const double tau = quantile_level(lambda1, lambda2);
  const double lipschitz = prob_t0 * (lambda2 - lambda1) *
                           (tau * d1_hi + (1.0 - tau) * d2_hi);
  res.grid_slack = std::max(2.0 * max_step, 2.0 * lipschitz / grid_resolution) + 1e-9;
  return res;
}

DualityScanResult duality_scan(const DiscreteInstance& instance, std::vector<double> q_grid) {
  if (q_grid.empty()) throw std::invalid_argument("duality_scan: empty grid");
  std::sort(q_grid.begin(), q_grid.end());
  if (q_grid.front() > instance.y_treated.min() || q_grid.back() < instance.y_treated.max())
    throw std::invalid_argument("duality_scan: grid must span the outcome support");

  DualityScanResult res;
  std::vector<double> values(q_grid.size());
  for (std::size_t i = 0; i < q_grid.size(); ++i)
    values[i] = dual_bound_at_q(instance.params, q_grid[i], instance.y_treated);
  const std::size_t imin = static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin());
  res.min_value = values[imin];
  res.argmin_q = q_grid[imin];
  for (std::size_t i = 0; i < q_grid.size(); ++i)
    if (values[i] <= res.min_value + 1e-12) res.argmin_set.push_back(q_grid[i]);

  const double q_star = instance.y_treated.quantile(instance.params.tau());
  for (double q : res.argmin_set)
    if (q == q_star) res.contains_q_star = true;

  // The loss is piecewise linear in q with slope at most max(tau, 1-tau).
  double max_gap = 0.0;
  for (std::size_t i = 1; i < q_grid.size(); ++i)
    max_gap = std::max(max_gap, q_grid[i] - q_grid[i - 1]);
  const double tau = instance.params.tau();
  res.grid_slack = instance.params.lambda_gap() * std::max(tau, 1.0 - tau) * max_gap + 1e-12;
  return res;
}

}  // namespace oracle
}  // namespace emsm
