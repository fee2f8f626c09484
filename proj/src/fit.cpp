#include "emsm/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "emsm/distribution.hpp"

namespace emsm {

double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

Eigen::VectorXd predict_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& coef) {
  Eigen::VectorXd eta = design * coef;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = logistic(eta(i));
  return eta;
}

Eigen::VectorXd clip_probabilities(Eigen::VectorXd p, double eps) {
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::clamp(p(i), eps, 1.0 - eps);
  return p;
}

namespace {


// Compensated accumulator: the line search needs loss differences at the
// rounding level of one term, not of the running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    carry += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

std::string runaway_columns(const Eigen::VectorXd& coef) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(coef.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + std::min<std::size_t>(3, idx.size()), idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      return std::fabs(coef(a)) > std::fabs(coef(b));
                    });
  std::string s;
  for (std::size_t k = 0; k < std::min<std::size_t>(3, idx.size()); ++k) {
    if (k) s += ", ";
    s += std::to_string(idx[k]);
  }
  return s;
}

// Damped Newton with backtracking on a convex objective given by callbacks.
// Steps are clamped to step_cap in sup-norm; near-singular curvature would
// otherwise send the line search on long flat rays.
template <typename LossF, typename GradF, typename HessF>
FitResult newton_minimize(Eigen::Index p, LossF loss, GradF grad, HessF hess, double tol,
                          int max_iter, double blowup, Eigen::VectorXd start,
                          double step_cap = 1e4, bool stall_exit = false) {
  Eigen::VectorXd beta = start.size() == p ? start : Eigen::VectorXd::Zero(p);
  double f = loss(beta);
  FitResult r;
  int stalls = 0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = grad(beta);
    r.diag.iterations = it;
    r.diag.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (r.diag.grad_norm <= tol) {
      r.diag.converged = true;
      break;
    }
    Eigen::MatrixXd h = hess(beta);
    const double ridge = 1e-12 * (1.0 + h.diagonal().maxCoeff());
    h.diagonal().array() += ridge;
    Eigen::VectorXd step = h.ldlt().solve(-g);
    if (!step.allFinite()) step = -g;
    const double norm = step.lpNorm<Eigen::Infinity>();
    if (norm > step_cap) step *= step_cap / norm;
    double t = 1.0;
    const double slope = g.dot(step);
    bool moved = false;
    double f_new = f;
    // The rounding allowance keeps full Newton steps acceptable once the
    // true decrease falls below summation noise.
    const double fp_slack = 4e-15 * (1.0 + std::fabs(f));
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd candidate = beta + t * step;
      const double fc = loss(candidate);
      if (std::isfinite(fc) && fc <= f + 1e-4 * t * slope + fp_slack) {
        beta = candidate;
        f_new = fc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    stalls = (f - f_new <= 1e-14 * (1.0 + std::fabs(f))) ? stalls + 1 : 0;
    f = f_new;
    if (stall_exit && stalls >= 2) break;
    if (beta.lpNorm<Eigen::Infinity>() > blowup)
      throw std::runtime_error("newton_minimize: diverging solution, columns " +
                               runaway_columns(beta));
  }
  r.coef = beta;
  const Eigen::VectorXd g_final = grad(beta);
  r.diag.grad_norm = g_final.lpNorm<Eigen::Infinity>();
  r.diag.converged = r.diag.grad_norm <= tol;
  return r;
}

}  // namespace

FitResult fit_cal_logistic(const Eigen::MatrixXd& design, const std::vector<int>& t, int arm) {
  const Eigen::Index n = design.rows();
  if (static_cast<Eigen::Index>(t.size()) != n)
    throw std::invalid_argument("fit_cal_logistic: treatment length mismatch");
  if (arm != 0 && arm != 1) throw std::invalid_argument("fit_cal_logistic: arm must be 0 or 1");
  Eigen::Index n1 = 0;
  for (int ti : t) n1 += ti;
  if (n1 == 0 || n1 == n) throw std::invalid_argument("fit_cal_logistic: an arm is empty");
  const double inv_n = 1.0 / static_cast<double>(n);
  // arm 1: mean{T exp(-u) + (1-T) u}; arm 0: mean{(1-T) exp(u) - T u}, u = f'g.
  const double sign = arm == 1 ? -1.0 : 1.0;

  auto loss = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd u = design * g;
    CompensatedSum s;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool exp_row = (t[static_cast<std::size_t>(i)] == 1) == (arm == 1);
      s.add(exp_row ? std::exp(sign * u(i)) : -sign * u(i));
    }
    return s.value() * inv_n;
  };
  auto grad = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd u = design * g;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool exp_row = (t[static_cast<std::size_t>(i)] == 1) == (arm == 1);
      w(i) = exp_row ? sign * std::exp(sign * u(i)) : -sign;
    }
    return Eigen::VectorXd(design.transpose() * w * inv_n);
  };
  auto hess = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd u = design * g;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool exp_row = (t[static_cast<std::size_t>(i)] == 1) == (arm == 1);
      w(i) = exp_row ? std::exp(sign * u(i)) : 0.0;
    }
    return Eigen::MatrixXd(design.transpose() * w.asDiagonal() * design * inv_n);
  };

  FitResult r;
  try {
    r = newton_minimize(design.cols(), loss, grad, hess, 1e-9, 200, 60.0,
                        Eigen::VectorXd::Zero(design.cols()));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("fit_cal_logistic: separation suspected; ") + e.what());
  }
  if (!r.diag.converged)
    throw std::runtime_error("fit_cal_logistic: stationarity not reached (gradient " +
                             std::to_string(r.diag.grad_norm) + ")");
  return r;
}

namespace {

double smooth_softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double response_scale(const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  double sw = 0.0, m = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    sw += w(i);
    m += w(i) * y(i);
  }
  m /= sw;
  double var = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) var += w(i) * (y(i) - m) * (y(i) - m);
  var /= sw;
  const double sd = std::sqrt(var);
  return sd > 0.0 ? sd : 1.0;
}

}  // namespace

FitResult fit_weighted_quantile(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weights, double tau) {
  const Eigen::Index n = design.rows();
  if (y.size() != n || weights.size() != n)
    throw std::invalid_argument("fit_weighted_quantile: size mismatch");
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("fit_weighted_quantile: tau outside [0,1]");
  double wsum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights(i) < 0.0) throw std::invalid_argument("fit_weighted_quantile: negative weight");
    wsum += weights(i);
  }
  if (wsum <= 0.0) throw std::invalid_argument("fit_weighted_quantile: all weights zero");

  const double scale = response_scale(y, weights);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto make_loss = [&](double eps) {
    return [&, eps](const Eigen::VectorXd& beta) {
      const Eigen::VectorXd r = y - design * beta;
      CompensatedSum s;
      for (Eigen::Index i = 0; i < n; ++i)
        s.add(weights(i) * (tau * r(i) + eps * smooth_softplus(-r(i) / eps)));
      return s.value() * inv_n;
    };
  };
  auto make_grad = [&](double eps) {
    return [&, eps](const Eigen::VectorXd& beta) {
      const Eigen::VectorXd r = y - design * beta;
      Eigen::VectorXd d(n);
      for (Eigen::Index i = 0; i < n; ++i)
        d(i) = weights(i) * (logistic(-r(i) / eps) - tau);
      return Eigen::VectorXd(design.transpose() * d * inv_n);
    };
  };
  auto make_hess = [&](double eps) {
    return [&, eps](const Eigen::VectorXd& beta) {
      const Eigen::VectorXd r = y - design * beta;
      Eigen::VectorXd d(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = logistic(-r(i) / eps);
        d(i) = weights(i) * s * (1.0 - s) / eps;
      }
      return Eigen::MatrixXd(design.transpose() * d.asDiagonal() * design * inv_n);
    };
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.cols());
  FitResult r;
  if (tau > 0.0 && tau < 1.0) {
    for (double factor : {1e-2, 1e-4, 1e-6}) {
      const double eps = factor * scale;
      r = newton_minimize(design.cols(), make_loss(eps), make_grad(eps), make_hess(eps),
                          1e-9 * std::max(1.0, scale), 100, 1e7, beta,
                          20.0 * std::max(1.0, scale), true);
      beta = r.coef;
    }
  } else {
    // Boundary levels reduce to the extreme weighted order statistic,
    // handled exactly by the intercept polish below.
    r.diag.converged = true;
  }

  // Exact minimization over the intercept coordinate: shift by the weighted
  // tau-quantile of the residuals.
  std::vector<double> res, w;
  res.reserve(static_cast<std::size_t>(n));
  w.reserve(static_cast<std::size_t>(n));
  const Eigen::VectorXd fitted = design * beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights(i) > 0.0) {
      res.push_back(y(i) - fitted(i));
      w.push_back(weights(i));
    }
  }
  beta(0) += weighted_quantile(res, w, tau);
  r.coef = beta;
  return r;
}

FitResult fit_weighted_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                          const Eigen::VectorXd& weights) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n || weights.size() != n)
    throw std::invalid_argument("fit_weighted_ls: size mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    if (weights(i) < 0.0) throw std::invalid_argument("fit_weighted_ls: negative weight");

  const Eigen::VectorXd sqw = weights.cwiseSqrt();
  const Eigen::MatrixXd a = sqw.asDiagonal() * design;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < p; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += std::to_string(perm(j));
    }
    throw std::runtime_error("fit_weighted_ls: singular weighted Gram matrix; dependent columns " +
                             cols);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd gram = a.transpose() * a * inv_n;
  const Eigen::VectorXd rhs = design.transpose() * (weights.asDiagonal() * response) * inv_n;
  const auto solver = gram.ldlt();
  Eigen::VectorXd alpha = solver.solve(rhs);
  // One round of iterative refinement keeps the score equations tight.
  const Eigen::VectorXd resid =
      design.transpose() * (weights.asDiagonal() * (response - design * alpha)) * inv_n;
  alpha += solver.solve(resid);

  FitResult r;
  r.coef = alpha;
  r.diag.iterations = 1;
  r.diag.grad_norm =
      (design.transpose() * (weights.asDiagonal() * (response - design * alpha)) * inv_n)
          .lpNorm<Eigen::Infinity>();
  r.diag.converged = r.diag.grad_norm <= 1e-9 * std::max(1.0, response_scale(response, weights));
  return r;
}

FitResult fit_ml_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& weights) {
  const Eigen::Index n = design.rows();
  if (y.size() != n || weights.size() != n)
    throw std::invalid_argument("fit_ml_logistic: size mismatch");
  const double inv_n = 1.0 / static_cast<double>(n);

  auto loss = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd u = design * g;
    CompensatedSum s;
    for (Eigen::Index i = 0; i < n; ++i)
      s.add(weights(i) * (smooth_softplus(u(i)) - y(i) * u(i)));
    return s.value() * inv_n;
  };
  auto grad = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd u = design * g;
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = weights(i) * (logistic(u(i)) - y(i));
    return Eigen::VectorXd(design.transpose() * d * inv_n);
  };
  auto hess = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd u = design * g;
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = logistic(u(i));
      d(i) = weights(i) * p * (1.0 - p);
    }
    return Eigen::MatrixXd(design.transpose() * d.asDiagonal() * design * inv_n);
  };

  try {
    return newton_minimize(design.cols(), loss, grad, hess, 1e-9, 200, 60.0,
                           Eigen::VectorXd::Zero(design.cols()));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("fit_ml_logistic: separation suspected; ") + e.what());
  }
}

}  // namespace emsm
