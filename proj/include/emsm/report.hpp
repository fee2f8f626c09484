#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emsm/dataset.hpp"
#include "emsm/design.hpp"
#include "emsm/estimate.hpp"

namespace emsm {

struct AnalysisConfig {
  std::string input;
  ColumnRoles roles;
  std::string outcome_kind = "binary";  // binary | continuous | continuous-nonneg
  DesignSpec design;
  std::string method = "CAL";  // CAL | RCAL | DV
  std::vector<double> lambda_grid{1.0};
  std::vector<double> delta_grid{1.0};
  std::string theta_rule = "aligned";  // {theta+/2, theta+, 3*theta+/2}
  double ci_level = 0.9;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool plots = false;
  std::string outcome_link = "auto";  // auto | linear | logistic
  int bootstrap_replicates = 1000;
};

AnalysisConfig parse_config_text(const std::string& json_text);
AnalysisConfig parse_config_file(const std::string& path);
std::string config_hash(const AnalysisConfig& config);

struct ResultRow {
  std::string estimand;  // mu1 | mu0 | ate | crr
  double lambda = 1.0;
  double delta = 1.0;
  std::optional<double> theta;  // DV rows only
  std::string method;
  double bound_lower = 0.0;
  double bound_upper = 0.0;
  double se_lower = 0.0;
  double se_upper = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool na = false;
  std::string note;
};

struct AnalysisResult {
  std::vector<ResultRow> rows;
  std::string hash;
  std::uint64_t seed = 0;
  double level = 0.9;
};

// Full pipeline: ingest, fit over the grid, write results.json / results.csv
// (and SVG figures when requested) under config.out_dir.
AnalysisResult run_analysis(const AnalysisConfig& config);

// Grid run on an already-loaded dataset; used by run_analysis and tests.
AnalysisResult analyze_dataset(const Dataset& data, const AnalysisConfig& config);

void write_outputs(const AnalysisResult& result, const AnalysisConfig& config);

std::string render_results_json(const AnalysisResult& result);
std::string render_results_csv(const AnalysisResult& result);
std::string render_svg(const AnalysisResult& result, const std::string& estimand);

}  // namespace emsm
