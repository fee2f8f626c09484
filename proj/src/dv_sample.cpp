#include "emsm/dv_sample.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "emsm/fit.hpp"
#include "emsm/rng.hpp"
#include "emsm/stats.hpp"

namespace emsm {

namespace {

Eigen::VectorXd arm_indicator(const std::vector<int>& t, int arm) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) w(static_cast<Eigen::Index>(i)) = t[i] == arm ? 1.0 : 0.0;
  return w;
}

}  // namespace

DvPluginModels fit_dv_plugin_models(const Dataset& data, const DesignMatrix& design) {
  DvPluginModels m;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(design.rows());
  Eigen::VectorXd tvec(design.rows());
  for (std::size_t i = 0; i < data.t.size(); ++i)
    tvec(static_cast<Eigen::Index>(i)) = data.t[i];
  m.coef_p1 = fit_ml_logistic(design.m, data.y, arm_indicator(data.t, 1)).coef;
  m.coef_p0 = fit_ml_logistic(design.m, data.y, arm_indicator(data.t, 0)).coef;
  m.coef_pi = fit_ml_logistic(design.m, tvec, ones).coef;
  return m;
}

DvPointBounds dv_unconditional_bounds(const Dataset& data, const DesignMatrix& design,
                                      const DvPluginModels& models, const DvParams& params) {
  const Eigen::Index n = design.rows();
  if (static_cast<Eigen::Index>(data.n()) != n)
    throw std::invalid_argument("dv_unconditional_bounds: data/design size mismatch");
  const Eigen::VectorXd p1 = clip_probabilities(predict_logistic(design.m, models.coef_p1));
  const Eigen::VectorXd p0 = clip_probabilities(predict_logistic(design.m, models.coef_p0));
  const Eigen::VectorXd pi = clip_probabilities(predict_logistic(design.m, models.coef_pi));

  const double b2 = bounding_factor(params.lambda2, params.theta);
  const double b1 =
      bounding_factor(params.lambda1 == 0.0 ? kInf : 1.0 / params.lambda1, params.theta);

  DvPointBounds out;
  double num_up = 0.0, num_lo = 0.0, den_up = 0.0, den_lo = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.mu1_upper += p1(i) * (pi(i) + (1.0 - pi(i)) * b2);
    out.mu1_lower += p1(i) * (pi(i) + (1.0 - pi(i)) / b1);
    out.mu0_upper += p0(i) * (pi(i) * b1 + 1.0 - pi(i));
    out.mu0_lower += p0(i) * (pi(i) / b2 + 1.0 - pi(i));
    out.ate_upper += (p1(i) - p0(i) / b2) * (pi(i) + (1.0 - pi(i)) * b2);
    out.ate_lower += (p1(i) - p0(i) * b1) * (pi(i) + (1.0 - pi(i)) / b1);
    num_up += p1(i) * (pi(i) + (1.0 - pi(i)) * b2);
    den_up += p0(i) * (pi(i) / b2 + 1.0 - pi(i));
    num_lo += p1(i) * (pi(i) + (1.0 - pi(i)) / b1);
    den_lo += p0(i) * (pi(i) * b1 + 1.0 - pi(i));
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.mu1_upper *= inv_n;
  out.mu1_lower *= inv_n;
  out.mu0_upper *= inv_n;
  out.mu0_lower *= inv_n;
  out.ate_upper *= inv_n;
  out.ate_lower *= inv_n;
  if (den_up == 0.0 || den_lo == 0.0) {
    out.crr.defined = false;
  } else {
    out.crr.upper = num_up / den_up;
    out.crr.lower = num_lo / den_lo;
  }
  return out;
}

namespace {

struct ReplicateOutcome {
  bool ok = false;
  DvPointBounds bounds;
};

}  // namespace

DvBootstrapResult dv_bootstrap_ci(const Dataset& data, const DesignMatrix& design,
                                  const DvParams& params, const BootstrapConfig& config) {
  if (config.replicates < 2)
    throw std::invalid_argument("dv_bootstrap_ci: replicates must be >= 2");
  if (!(config.level > 0.0 && config.level < 1.0))
    throw std::invalid_argument("dv_bootstrap_ci: level outside (0,1)");

  DvBootstrapResult result;
  {
    const DvPluginModels m = fit_dv_plugin_models(data, design);
    result.point = dv_unconditional_bounds(data, design, m, params);
  }

  std::vector<ReplicateOutcome> reps(static_cast<std::size_t>(config.replicates));
  auto run_replicate = [&](int r) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    const std::size_t n = data.n();
    // Resample (y, t, design row) jointly so replicates share the original
    // column construction and standardization.
    Dataset boot;
    boot.y.resize(static_cast<Eigen::Index>(n));
    boot.t.resize(n);
    DesignMatrix bdesign;
    bdesign.m.resize(static_cast<Eigen::Index>(n), design.m.cols());
    bdesign.columns = design.columns;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<Eigen::Index>(rng.index(n));
      boot.y(static_cast<Eigen::Index>(i)) = data.y(j);
      boot.t[i] = data.t[static_cast<std::size_t>(j)];
      bdesign.m.row(static_cast<Eigen::Index>(i)) = design.m.row(j);
    }
    ReplicateOutcome out;
    try {
      const DvPluginModels m = fit_dv_plugin_models(boot, bdesign);
      out.bounds = dv_unconditional_bounds(boot, bdesign, m, params);
      out.ok = true;
    } catch (const std::exception&) {
      out.ok = false;
    }
    reps[static_cast<std::size_t>(r)] = out;
  };

  int n_threads = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, config.replicates));
  {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < config.replicates; r = next.fetch_add(1))
          run_replicate(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<double> mu1u, mu1l, mu0u, mu0l, ateu, atel, crru, crrl;
  for (const auto& rep : reps) {
    if (!rep.ok) {
      ++result.failed_replicates;
      continue;
    }
    mu1u.push_back(rep.bounds.mu1_upper);
    mu1l.push_back(rep.bounds.mu1_lower);
    mu0u.push_back(rep.bounds.mu0_upper);
    mu0l.push_back(rep.bounds.mu0_lower);
    ateu.push_back(rep.bounds.ate_upper);
    atel.push_back(rep.bounds.ate_lower);
    if (rep.bounds.crr.defined) {
      crru.push_back(rep.bounds.crr.upper);
      crrl.push_back(rep.bounds.crr.lower);
    }
  }
  if (result.failed_replicates > config.replicates / 20)
    throw std::runtime_error("dv_bootstrap_ci: more than 5% of replicate fits failed");

  const double c = 1.0 - config.level;
  const double z = normal_quantile(1.0 - c / 2.0);
  auto lo_pct = [&](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    return sorted_quantile(v, c / 2.0);
  };
  auto hi_pct = [&](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    return sorted_quantile(v, 1.0 - c / 2.0);
  };

  result.interval_lower.mu1_lower = lo_pct(mu1l);
  result.interval_upper.mu1_upper = hi_pct(mu1u);
  result.interval_lower.mu0_lower = lo_pct(mu0l);
  result.interval_upper.mu0_upper = hi_pct(mu0u);
  result.interval_lower.ate_lower = lo_pct(atel);
  result.interval_upper.ate_upper = hi_pct(ateu);
  if (!crrl.empty()) {
    result.interval_lower.crr.lower = lo_pct(crrl);
    result.interval_upper.crr.upper = hi_pct(crru);
  } else {
    result.interval_lower.crr.defined = false;
    result.interval_upper.crr.defined = false;
  }

  // SEs back-solved by matching the interval endpoints to the point bounds.
  result.se_lower.mu1_lower = (result.point.mu1_lower - result.interval_lower.mu1_lower) / z;
  result.se_upper.mu1_upper = (result.interval_upper.mu1_upper - result.point.mu1_upper) / z;
  result.se_lower.mu0_lower = (result.point.mu0_lower - result.interval_lower.mu0_lower) / z;
  result.se_upper.mu0_upper = (result.interval_upper.mu0_upper - result.point.mu0_upper) / z;
  result.se_lower.ate_lower = (result.point.ate_lower - result.interval_lower.ate_lower) / z;
  result.se_upper.ate_upper = (result.interval_upper.ate_upper - result.point.ate_upper) / z;
  if (!crrl.empty() && result.point.crr.defined) {
    result.se_lower.crr.lower = (result.point.crr.lower - result.interval_lower.crr.lower) / z;
    result.se_upper.crr.upper = (result.interval_upper.crr.upper - result.point.crr.upper) / z;
  }
  return result;
}

std::pair<double, double> dv_cate_variance_bounds(double p1_hat, double p0_hat, double pi_hat,
                                                  double se_p1, double se_p0, double se_pi,
                                                  const DvParams& params) {
  const double b2 = bounding_factor(params.lambda2, params.theta);
  const double b1 =
      bounding_factor(params.lambda1 == 0.0 ? kInf : 1.0 / params.lambda1, params.theta);
  const double s1 = se_p1 * se_p1, s0 = se_p0 * se_p0, s = se_pi * se_pi;

  const double wl = pi_hat + (1.0 - pi_hat) / b1;
  const double var_lower = (s1 + s0 * b1 * b1) * wl * wl +
                           std::pow(p1_hat - p0_hat * b1, 2) * std::pow(1.0 - 1.0 / b1, 2) * s;
  const double wu = 1.0 - pi_hat + pi_hat / b2;
  const double var_upper = (s1 * b2 * b2 + s0) * wu * wu +
                           std::pow(p1_hat * b2 - p0_hat, 2) * std::pow(1.0 - 1.0 / b2, 2) * s;
  return {var_lower, var_upper};
}

}  // namespace emsm
