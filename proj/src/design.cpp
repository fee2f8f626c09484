#include "emsm/design.hpp"

#include <cmath>
#include <stdexcept>

namespace emsm {

namespace {

int nonzero_count(const Eigen::VectorXd& col) {
  int c = 0;
  for (Eigen::Index i = 0; i < col.size(); ++i)
    if (col(i) != 0.0) ++c;
  return c;
}

}  // namespace

DesignMatrix build_design(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                          const DesignSpec& spec) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n == 0) throw std::invalid_argument("build_design: zero rows");
  if (static_cast<Eigen::Index>(names.size()) != d)
    throw std::invalid_argument("build_design: name count mismatch");

  std::vector<std::pair<std::string, Eigen::VectorXd>> raw;
  raw.reserve(static_cast<std::size_t>(d + d * (d - 1) / 2));
  for (Eigen::Index j = 0; j < d; ++j) raw.emplace_back(names[j], x.col(j));
  DesignMatrix out;
  if (spec.terms == DesignTerms::MainPlusInteractions) {
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index k = j + 1; k < d; ++k) {
        Eigen::VectorXd prod = x.col(j).cwiseProduct(x.col(k));
        std::string name = names[j] + ":" + names[k];
        if (spec.sparsity_min_count > 0 && nonzero_count(prod) < spec.sparsity_min_count) {
          out.dropped.push_back(name + " (sparse)");
          continue;
        }
        raw.emplace_back(std::move(name), std::move(prod));
      }
    }
  }

  std::vector<std::pair<std::string, Eigen::VectorXd>> kept;
  std::vector<DesignColumn> meta;
  kept.reserve(raw.size());
  for (auto& [name, col] : raw) {
    const double m = col.mean();
    const double var = (col.array() - m).square().sum() / static_cast<double>(n);
    if (var == 0.0) {
      out.dropped.push_back(name + " (constant)");
      continue;
    }
    DesignColumn c;
    c.name = name;
    if (spec.standardize) {
      c.center = m;
      c.scale = std::sqrt(var);
      col = (col.array() - c.center) / c.scale;
    }
    meta.push_back(c);
    kept.emplace_back(name, std::move(col));
  }

  out.m.resize(n, static_cast<Eigen::Index>(kept.size()) + 1);
  out.m.col(0).setOnes();
  out.columns.clear();
  out.columns.push_back({"(intercept)", 0.0, 1.0});
  for (std::size_t j = 0; j < kept.size(); ++j) {
    out.m.col(static_cast<Eigen::Index>(j) + 1) = kept[j].second;
    out.columns.push_back(meta[j]);
  }
  return out;
}

}  // namespace emsm
