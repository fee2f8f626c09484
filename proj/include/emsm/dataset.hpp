#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace emsm {

// Observational sample: outcome, binary treatment, covariate block.
struct Dataset {
  Eigen::VectorXd y;
  std::vector<int> t;
  Eigen::MatrixXd x;  // n rows, one column per covariate
  std::vector<std::string> covariate_names;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t n_treated() const;
  std::size_t n_control() const;
};

struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;  // empty = all remaining columns
};

// Reads a UTF-8 CSV with a header row into a typed dataset. All cells must
// be numeric; the treatment column must be exactly 0 or 1. Categorical
// covariates must be pre-expanded to indicator columns. Errors carry
// row/column coordinates.
Dataset ingest_csv(const std::string& path, const ColumnRoles& roles);

// Same parser on in-memory text, used by tests.
Dataset ingest_csv_text(const std::string& text, const ColumnRoles& roles,
                        const std::string& origin = "<memory>");

void write_csv(const std::string& path, const Dataset& data);

}  // namespace emsm
