#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace emsm {

enum class DesignTerms { MainEffects, MainPlusInteractions };

struct DesignSpec {
  DesignTerms terms = DesignTerms::MainEffects;
  bool standardize = true;
  // Pairwise-interaction columns with fewer nonzero entries are dropped.
  int sparsity_min_count = 0;
};

struct DesignColumn {
  std::string name;
  double center = 0.0;  // subtracted before scaling
  double scale = 1.0;   // divisor; 1 for the intercept
};

// Model matrix with an intercept in column 0 that is never standardized
// or penalized. Column metadata records centering/scaling so that fitted
// coefficients can be mapped back to the raw scale.
struct DesignMatrix {
  Eigen::MatrixXd m;
  std::vector<DesignColumn> columns;
  std::vector<std::string> dropped;  // constant or too-sparse columns

  Eigen::Index cols() const { return m.cols(); }
  Eigen::Index rows() const { return m.rows(); }
};

DesignMatrix build_design(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                          const DesignSpec& spec);

}  // namespace emsm
