#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "emsm/distribution.hpp"
#include "emsm/fit.hpp"
#include "emsm/rng.hpp"

namespace emsm {

double soft_threshold(double x, double k) {
  if (x > k) return x - k;
  if (x < -k) return x + k;
  return 0.0;
}

namespace {

// Smooth part of each penalized objective, (1/n)-normalized. The weighted
// quantile loss enters through its logistic-smoothed surrogate with
// bandwidth 1e-3 * scale(y); the reported KKT residuals refer to that
// surrogate.
struct SmoothObjective {
  std::function<double(const Eigen::VectorXd&)> loss;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
};

double wq_bandwidth(const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  double sw = 0.0, m = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    sw += w(i);
    m += w(i) * y(i);
  }
  if (sw <= 0.0) throw std::invalid_argument("rcal: all weights zero");
  m /= sw;
  double var = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) var += w(i) * (y(i) - m) * (y(i) - m);
  const double sd = std::sqrt(var / sw);
  return 1e-3 * (sd > 0.0 ? sd : 1.0);
}

double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

SmoothObjective make_objective(RcalProblem kind, const Eigen::MatrixXd& design,
                               const RcalProblemData& data) {
  const Eigen::Index n = design.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  switch (kind) {
    case RcalProblem::CalLogistic: {
      if (static_cast<Eigen::Index>(data.t.size()) != n)
        throw std::invalid_argument("rcal: treatment length mismatch");
      const int arm = data.arm;
      const double sign = arm == 1 ? -1.0 : 1.0;
      auto loss = [&design, &data, n, inv_n, arm, sign](const Eigen::VectorXd& b) {
        const Eigen::VectorXd u = design * b;
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const bool exp_row = (data.t[static_cast<std::size_t>(i)] == 1) == (arm == 1);
          s += exp_row ? std::exp(sign * u(i)) : -sign * u(i);
        }
        return s * inv_n;
      };
      auto grad = [&design, &data, n, inv_n, arm, sign](const Eigen::VectorXd& b) {
        const Eigen::VectorXd u = design * b;
        Eigen::VectorXd d(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const bool exp_row = (data.t[static_cast<std::size_t>(i)] == 1) == (arm == 1);
          d(i) = exp_row ? sign * std::exp(sign * u(i)) : -sign;
        }
        return Eigen::VectorXd(design.transpose() * d * inv_n);
      };
      return {loss, grad};
    }
    case RcalProblem::WeightedQuantile: {
      const double eps = wq_bandwidth(data.y, data.weights);
      const double tau = data.tau;
      auto loss = [&design, &data, n, inv_n, eps, tau](const Eigen::VectorXd& b) {
        const Eigen::VectorXd r = data.y - design * b;
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
          s += data.weights(i) * (tau * r(i) + eps * softplus(-r(i) / eps));
        return s * inv_n;
      };
      auto grad = [&design, &data, n, inv_n, eps, tau](const Eigen::VectorXd& b) {
        const Eigen::VectorXd r = data.y - design * b;
        Eigen::VectorXd d(n);
        for (Eigen::Index i = 0; i < n; ++i)
          d(i) = data.weights(i) * (logistic(-r(i) / eps) - tau);
        return Eigen::VectorXd(design.transpose() * d * inv_n);
      };
      return {loss, grad};
    }
    case RcalProblem::WeightedLs: {
      auto loss = [&design, &data, n, inv_n](const Eigen::VectorXd& b) {
        const Eigen::VectorXd r = data.y - design * b;
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += data.weights(i) * r(i) * r(i);
        return s * inv_n;
      };
      auto grad = [&design, &data, inv_n](const Eigen::VectorXd& b) {
        const Eigen::VectorXd r = data.y - design * b;
        return Eigen::VectorXd(-2.0 * design.transpose() * (data.weights.asDiagonal() * r) *
                               inv_n);
      };
      return {loss, grad};
    }
  }
  throw std::logic_error("rcal: unreachable");
}

Eigen::VectorXd prox_l1_skip_intercept(Eigen::VectorXd v, double k) {
  for (Eigen::Index j = 1; j < v.size(); ++j) v(j) = soft_threshold(v(j), k);
  return v;
}

// FISTA with backtracking and restart-on-increase; intercept unpenalized.
FitResult fista(const SmoothObjective& obj, Eigen::Index p, double kappa,
                const LassoConfig& config, Eigen::VectorXd start) {
  Eigen::VectorXd beta = start.size() == p ? std::move(start) : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z = beta;
  double momentum = 1.0;
  double step = 1.0;
  double f_beta = obj.loss(beta);

  auto penalty = [&](const Eigen::VectorXd& b) {
    double s = 0.0;
    for (Eigen::Index j = 1; j < b.size(); ++j) s += std::fabs(b(j));
    return kappa * s;
  };
  auto kkt = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd g = obj.grad(b);
    double worst = std::fabs(g(0));
    for (Eigen::Index j = 1; j < b.size(); ++j) {
      const double r = b(j) != 0.0 ? std::fabs(g(j) + kappa * (b(j) > 0.0 ? 1.0 : -1.0))
                                   : std::max(std::fabs(g(j)) - kappa, 0.0);
      worst = std::max(worst, r);
    }
    return worst;
  };

  FitResult res;
  if (kkt(beta) <= config.kkt_tol) {
    res.coef = beta;
    res.diag.grad_norm = kkt(beta);
    res.diag.converged = true;
    return res;
  }
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    const double fz = obj.loss(z);
    const Eigen::VectorXd gz = obj.grad(z);
    Eigen::VectorXd next;
    // Backtrack until the quadratic majorization holds at the prox point.
    for (int bt = 0; bt < 100; ++bt) {
      next = prox_l1_skip_intercept(z - step * gz, step * kappa);
      const Eigen::VectorXd d = next - z;
      const double fn = obj.loss(next);
      if (std::isfinite(fn) && fn <= fz + gz.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-16)
        break;
      step *= 0.5;
    }
    const double f_next = obj.loss(next) + penalty(next);
    if (f_next > f_beta + penalty(beta)) {
      // Restart the momentum sequence from the current iterate.
      z = beta;
      momentum = 1.0;
      if ((it & 63) == 0 && kkt(beta) <= config.kkt_tol) break;
      continue;
    }
    const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    z = next + ((momentum - 1.0) / momentum_next) * (next - beta);
    beta = next;
    f_beta = obj.loss(beta);
    momentum = momentum_next;
    step *= 1.05;
    if ((it & 15) == 0 && kkt(beta) <= config.kkt_tol) break;
  }

  res.coef = beta;
  res.diag.iterations = it;
  res.diag.grad_norm = kkt(beta);
  res.diag.converged = res.diag.grad_norm <= config.kkt_tol * 10.0;
  if (!res.diag.converged)
    throw std::runtime_error("rcal: proximal gradient did not reach the KKT tolerance (residual " +
                             std::to_string(res.diag.grad_norm) + ")");
  return res;
}

// Intercept-only optimum of the (surrogate) smooth loss, used as the null
// model for kappa*. Solved to machine-level stationarity by 1-D Newton with
// a numeric second derivative, so that the model stays exactly null over
// the kappa >= kappa* part of the path.
Eigen::VectorXd null_model(RcalProblem kind, const Eigen::MatrixXd& design,
                           const RcalProblemData& data) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.cols());
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(design.rows(), 1);
  const SmoothObjective obj = make_objective(kind, ones, data);
  Eigen::VectorXd b(1);
  switch (kind) {
    case RcalProblem::CalLogistic:
      b(0) = fit_cal_logistic(ones, data.t, data.arm).coef(0);
      break;
    case RcalProblem::WeightedQuantile: {
      std::vector<double> ys, ws;
      for (Eigen::Index i = 0; i < data.y.size(); ++i)
        if (data.weights(i) > 0.0) {
          ys.push_back(data.y(i));
          ws.push_back(data.weights(i));
        }
      b(0) = weighted_quantile(ys, ws, data.tau);
      break;
    }
    case RcalProblem::WeightedLs:
      b(0) = fit_weighted_ls(ones, data.y, data.weights).coef(0);
      break;
  }
  const double scale = std::max(1.0, std::fabs(b(0)));
  for (int it = 0; it < 100; ++it) {
    const double g = obj.grad(b)(0);
    if (std::fabs(g) <= 1e-14) break;
    const double h = 1e-6 * scale;
    Eigen::VectorXd bp = b, bm = b;
    bp(0) += h;
    bm(0) -= h;
    const double curv = (obj.grad(bp)(0) - obj.grad(bm)(0)) / (2.0 * h);
    if (!(curv > 0.0)) break;
    const double step = g / curv;
    b(0) -= std::clamp(step, -scale, scale);
    if (std::fabs(step) <= 1e-15 * scale) break;
  }
  beta(0) = b(0);
  return beta;
}

double out_of_fold_loss(RcalProblem kind, const Eigen::MatrixXd& design,
                        const RcalProblemData& data, const Eigen::VectorXd& coef,
                        const std::vector<int>& fold, int target_fold) {
  const Eigen::VectorXd u = design * coef;
  double s = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    if (fold[static_cast<std::size_t>(i)] != target_fold) continue;
    ++count;
    switch (kind) {
      case RcalProblem::CalLogistic: {
        const int ti = data.t[static_cast<std::size_t>(i)];
        if (data.arm == 1)
          s += ti == 1 ? std::exp(-u(i)) : u(i);
        else
          s += ti == 0 ? std::exp(u(i)) : -u(i);
        break;
      }
      case RcalProblem::WeightedQuantile:
        s += data.weights(i) * check_loss(data.tau, data.y(i), u(i));
        break;
      case RcalProblem::WeightedLs: {
        const double r = data.y(i) - u(i);
        s += data.weights(i) * r * r;
        break;
      }
    }
  }
  return count > 0 ? s / count : 0.0;
}

RcalProblemData subset_data(const RcalProblemData& data, const std::vector<int>& fold,
                            int target_fold, bool keep) {
  RcalProblemData out;
  out.arm = data.arm;
  out.tau = data.tau;
  std::vector<double> ys, ws;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if ((fold[i] == target_fold) != keep) continue;
    if (!data.t.empty()) out.t.push_back(data.t[i]);
    if (data.y.size() > 0) ys.push_back(data.y(static_cast<Eigen::Index>(i)));
    if (data.weights.size() > 0) ws.push_back(data.weights(static_cast<Eigen::Index>(i)));
  }
  out.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  out.weights = Eigen::Map<Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(ws.size()));
  return out;
}

Eigen::MatrixXd subset_rows(const Eigen::MatrixXd& m, const std::vector<int>& fold,
                            int target_fold, bool keep) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if ((fold[i] == target_fold) == keep) rows.push_back(static_cast<Eigen::Index>(i));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

double rcal_kkt_residual(RcalProblem kind, const Eigen::MatrixXd& design,
                         const RcalProblemData& data, const Eigen::VectorXd& coef, double kappa) {
  const SmoothObjective obj = make_objective(kind, design, data);
  const Eigen::VectorXd g = obj.grad(coef);
  double worst = std::fabs(g(0));
  for (Eigen::Index j = 1; j < coef.size(); ++j) {
    const double r = coef(j) != 0.0 ? std::fabs(g(j) + kappa * (coef(j) > 0.0 ? 1.0 : -1.0))
                                    : std::max(std::fabs(g(j)) - kappa, 0.0);
    worst = std::max(worst, r);
  }
  return worst;
}

FitResult rcal_fit_at(RcalProblem kind, const Eigen::MatrixXd& design,
                      const RcalProblemData& data, double kappa, const LassoConfig& config) {
  if (kappa < 0.0) throw std::invalid_argument("rcal_fit_at: kappa must be >= 0");
  if (kappa == 0.0 && kind == RcalProblem::WeightedQuantile) {
    // At zero penalty the check-loss problem is the plain fit; the proximal
    // path works on a wider smoothing bandwidth, so the continuation solver
    // is the one that meets the unpenalized tolerance.
    return fit_weighted_quantile(design, data.y, data.weights, data.tau);
  }
  const SmoothObjective obj = make_objective(kind, design, data);
  LassoConfig cfg = config;
  if (kappa == 0.0) cfg.kkt_tol = std::min(config.kkt_tol, 1e-9);
  return fista(obj, design.cols(), kappa, cfg, null_model(kind, design, data));
}

RcalResult fit_rcal_lasso(RcalProblem kind, const Eigen::MatrixXd& design,
                          const RcalProblemData& data, const LassoConfig& config) {
  if (config.folds < 2) throw std::invalid_argument("fit_rcal_lasso: folds must be >= 2");
  const Eigen::Index n = design.rows();
  const SmoothObjective obj = make_objective(kind, design, data);

  RcalResult res;
  const Eigen::VectorXd beta0 = null_model(kind, design, data);
  const Eigen::VectorXd g0 = obj.grad(beta0);
  double kappa_star = 0.0;
  for (Eigen::Index j = 1; j < g0.size(); ++j) kappa_star = std::max(kappa_star, std::fabs(g0(j)));
  res.kappa_star = kappa_star;

  std::vector<double> grid(static_cast<std::size_t>(config.grid_size));
  for (int j = 0; j < config.grid_size; ++j)
    grid[static_cast<std::size_t>(j)] = kappa_star / std::pow(2.0, j / 4.0);

  const std::vector<int> fold = fold_assignment(config.seed, static_cast<std::size_t>(n),
                                                config.folds);

  // Out-of-fold losses, warm-starting along the path within each fold.
  std::vector<double> cv(grid.size(), 0.0);
  for (int f = 0; f < config.folds; ++f) {
    const Eigen::MatrixXd train_x = subset_rows(design, fold, f, false);
    const RcalProblemData train_d = subset_data(data, fold, f, false);
    const SmoothObjective train_obj = make_objective(kind, train_x, train_d);
    Eigen::VectorXd warm = null_model(kind, train_x, train_d);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const FitResult fit = fista(train_obj, train_x.cols(), grid[j], config, warm);
      warm = fit.coef;
      cv[j] += out_of_fold_loss(kind, design, data, fit.coef, fold, f) / config.folds;
    }
  }

  Eigen::VectorXd warm = beta0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    RcalPathPoint pt;
    pt.kappa = grid[j];
    const FitResult fit = fista(obj, design.cols(), grid[j], config, warm);
    warm = fit.coef;
    pt.coef = fit.coef;
    pt.kkt_residual = rcal_kkt_residual(kind, design, data, fit.coef, grid[j]);
    pt.cv_loss = cv[j];
    for (Eigen::Index c = 1; c < fit.coef.size(); ++c)
      if (fit.coef(c) != 0.0) ++pt.nonzero;
    res.path.push_back(std::move(pt));
  }

  res.selected = 0;
  for (std::size_t j = 1; j < res.path.size(); ++j)
    if (res.path[j].cv_loss < res.path[static_cast<std::size_t>(res.selected)].cv_loss)
      res.selected = static_cast<int>(j);
  return res;
}

}  // namespace emsm
