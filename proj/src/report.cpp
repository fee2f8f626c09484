#include "emsm/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "emsm/dv.hpp"
#include "emsm/dv_sample.hpp"
#include "emsm/stats.hpp"

namespace emsm {

using nlohmann::json;

namespace {

json number_or_marker(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return v;
}

std::string format_cell(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

json config_to_json(const AnalysisConfig& c) {
  json j;
  j["input"] = c.input;
  j["roles"] = {{"outcome", c.roles.outcome},
                {"treatment", c.roles.treatment},
                {"covariates", c.roles.covariates}};
  j["outcome_kind"] = c.outcome_kind;
  j["design"] = {{"terms", c.design.terms == DesignTerms::MainEffects ? "main" : "interactions"},
                 {"standardize", c.design.standardize},
                 {"sparsity_min_count", c.design.sparsity_min_count}};
  j["method"] = c.method;
  j["lambda_grid"] = c.lambda_grid;
  j["delta_grid"] = c.delta_grid;
  j["theta_rule"] = c.theta_rule;
  j["ci_level"] = c.ci_level;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["plots"] = c.plots;
  j["outcome_link"] = c.outcome_link;
  j["bootstrap_replicates"] = c.bootstrap_replicates;
  return j;
}

}  // namespace

AnalysisConfig parse_config_text(const std::string& json_text) {
  const json j = json::parse(json_text);
  AnalysisConfig c;
  if (j.contains("input")) c.input = j.at("input").get<std::string>();
  if (j.contains("roles")) {
    const auto& r = j.at("roles");
    c.roles.outcome = r.value("outcome", "y");
    c.roles.treatment = r.value("treatment", "t");
    if (r.contains("covariates"))
      c.roles.covariates = r.at("covariates").get<std::vector<std::string>>();
  }
  c.outcome_kind = j.value("outcome_kind", c.outcome_kind);
  if (j.contains("design")) {
    const auto& d = j.at("design");
    const std::string terms = d.value("terms", "main");
    if (terms == "main")
      c.design.terms = DesignTerms::MainEffects;
    else if (terms == "interactions")
      c.design.terms = DesignTerms::MainPlusInteractions;
    else
      throw std::invalid_argument("config: design.terms must be 'main' or 'interactions'");
    c.design.standardize = d.value("standardize", true);
    c.design.sparsity_min_count = d.value("sparsity_min_count", 0);
  }
  c.method = j.value("method", c.method);
  if (j.contains("lambda_grid")) c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  if (j.contains("delta_grid")) c.delta_grid = j.at("delta_grid").get<std::vector<double>>();
  c.theta_rule = j.value("theta_rule", c.theta_rule);
  c.ci_level = j.value("ci_level", c.ci_level);
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.plots = j.value("plots", c.plots);
  c.outcome_link = j.value("outcome_link", c.outcome_link);
  c.bootstrap_replicates = j.value("bootstrap_replicates", c.bootstrap_replicates);

  if (c.lambda_grid.empty() || c.delta_grid.empty())
    throw std::invalid_argument("config: grids must be nonempty");
  if (!(c.ci_level > 0.0 && c.ci_level < 1.0))
    throw std::invalid_argument("config: ci_level outside (0,1)");
  if (c.method != "CAL" && c.method != "RCAL" && c.method != "DV")
    throw std::invalid_argument("config: method must be CAL, RCAL or DV");
  if (c.method == "DV" && c.outcome_kind != "binary")
    throw std::invalid_argument("config: the DV method requires a binary outcome");
  return c;
}

AnalysisConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_config_file: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_hash(const AnalysisConfig& config) {
  const std::string dump = config_to_json(config).dump();
  std::ostringstream os;
  os << std::hex << fnv1a_hash(std::span<const char>(dump.data(), dump.size()));
  return os.str();
}

namespace {

void append_interval_rows(std::vector<ResultRow>& rows, const EstimateReport& report,
                          double lambda, double delta, const std::string& method) {
  auto add = [&](const std::string& estimand, const IntervalReport& iv) {
    ResultRow r;
    r.estimand = estimand;
    r.lambda = lambda;
    r.delta = delta;
    r.method = method;
    r.bound_lower = iv.lower.estimate;
    r.bound_upper = iv.upper.estimate;
    const double dn = static_cast<double>(report.n);
    r.se_lower = std::sqrt(iv.lower.variance / dn);
    r.se_upper = std::sqrt(iv.upper.variance / dn);
    r.ci_lower = iv.ci_two_lower;
    r.ci_upper = iv.ci_two_upper;
    rows.push_back(std::move(r));
  };
  add("mu1", report.mu1);
  add("mu0", report.mu0);
  add("ate", report.ate);
  if (report.crr) add("crr", *report.crr);
}

void append_dv_rows(std::vector<ResultRow>& rows, const Dataset& data,
                    const DesignMatrix& design, const AnalysisConfig& config) {
  for (double lambda : config.lambda_grid) {
    const double tau = quantile_level(1.0 / lambda, lambda);
    for (double delta : config.delta_grid) {
      const double theta_plus = theta_plus_minus(delta, tau).first;
      for (double factor : {0.5, 1.0, 1.5}) {
        const double theta = std::isinf(theta_plus) ? kInf : factor * theta_plus;
        auto na_row = [&](const std::string& estimand) {
          ResultRow r;
          r.estimand = estimand;
          r.lambda = lambda;
          r.delta = delta;
          r.theta = theta;
          r.method = "DV";
          r.na = true;
          r.note = "theta below 1 excluded";
          r.bound_lower = r.bound_upper = r.se_lower = r.se_upper = r.ci_lower = r.ci_upper =
              std::nan("");
          rows.push_back(std::move(r));
        };
        if (theta < 1.0) {
          for (const char* estimand : {"mu1", "mu0", "ate", "crr"}) na_row(estimand);
          continue;
        }
        const DvParams params(theta, 1.0 / lambda, lambda);
        BootstrapConfig bc;
        bc.replicates = config.bootstrap_replicates;
        bc.seed = config.seed;
        bc.level = config.ci_level;
        DvBootstrapResult boot;
        try {
          boot = dv_bootstrap_ci(data, design, params, bc);
        } catch (const std::exception& e) {
          for (const char* estimand : {"mu1", "mu0", "ate", "crr"}) {
            ResultRow r;
            r.estimand = estimand;
            r.lambda = lambda;
            r.delta = delta;
            r.theta = theta;
            r.method = "DV";
            r.na = true;
            r.note = std::string("cell failed: ") + e.what();
            r.bound_lower = r.bound_upper = r.se_lower = r.se_upper = r.ci_lower = r.ci_upper =
                std::nan("");
            rows.push_back(std::move(r));
          }
          continue;
        }
        auto add = [&](const std::string& estimand, double lo, double hi, double se_lo,
                       double se_hi, double ci_lo, double ci_hi) {
          ResultRow r;
          r.estimand = estimand;
          r.lambda = lambda;
          r.delta = delta;
          r.theta = theta;
          r.method = "DV";
          r.bound_lower = lo;
          r.bound_upper = hi;
          r.se_lower = se_lo;
          r.se_upper = se_hi;
          r.ci_lower = ci_lo;
          r.ci_upper = ci_hi;
          rows.push_back(std::move(r));
        };
        add("mu1", boot.point.mu1_lower, boot.point.mu1_upper, boot.se_lower.mu1_lower,
            boot.se_upper.mu1_upper, boot.interval_lower.mu1_lower,
            boot.interval_upper.mu1_upper);
        add("mu0", boot.point.mu0_lower, boot.point.mu0_upper, boot.se_lower.mu0_lower,
            boot.se_upper.mu0_upper, boot.interval_lower.mu0_lower,
            boot.interval_upper.mu0_upper);
        add("ate", boot.point.ate_lower, boot.point.ate_upper, boot.se_lower.ate_lower,
            boot.se_upper.ate_upper, boot.interval_lower.ate_lower,
            boot.interval_upper.ate_upper);
        if (boot.point.crr.defined)
          add("crr", boot.point.crr.lower, boot.point.crr.upper, boot.se_lower.crr.lower,
              boot.se_upper.crr.upper, boot.interval_lower.crr.lower,
              boot.interval_upper.crr.upper);
      }
    }
  }
}

}  // namespace

AnalysisResult analyze_dataset(const Dataset& data, const AnalysisConfig& config) {
  AnalysisResult result;
  result.hash = config_hash(config);
  result.seed = config.seed;
  result.level = config.ci_level;

  const DesignMatrix design = build_design(data.x, data.covariate_names, config.design);

  if (config.method == "DV") {
    if (!outcome_is_binary(data))
      throw std::invalid_argument("analyze_dataset: the DV method requires a binary outcome");
    append_dv_rows(result.rows, data, design, config);
  } else {
    const EstimationMethod method =
        config.method == "RCAL" ? EstimationMethod::Rcal : EstimationMethod::Cal;
    OutcomeLink link = OutcomeLink::Linear;
    if (config.outcome_link == "logistic" ||
        (config.outcome_link == "auto" && config.outcome_kind == "binary" &&
         method == EstimationMethod::Cal))
      link = OutcomeLink::Logistic;
    if (method == EstimationMethod::Rcal) link = OutcomeLink::Linear;

    GridSpec grid{config.lambda_grid, config.delta_grid};
    LassoConfig lasso;
    lasso.seed = config.seed;
    const auto cells =
        run_grid(data, design, design, grid, method, link, config.ci_level, lasso);
    for (const auto& cell : cells) {
      if (!cell.ok()) {
        for (const char* estimand : {"mu1", "mu0", "ate", "crr"}) {
          ResultRow r;
          r.estimand = estimand;
          r.lambda = cell.lambda;
          r.delta = cell.delta;
          r.method = config.method;
          r.na = true;
          r.note = "cell failed: " + cell.error;
          r.bound_lower = r.bound_upper = r.se_lower = r.se_upper = r.ci_lower = r.ci_upper =
              std::nan("");
          result.rows.push_back(std::move(r));
        }
        continue;
      }
      append_interval_rows(result.rows, cell.report, cell.lambda, cell.delta, config.method);
    }
  }

  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const ResultRow& a, const ResultRow& b) {
                     if (a.estimand != b.estimand) return a.estimand < b.estimand;
                     if (a.lambda != b.lambda) return a.lambda < b.lambda;
                     if (a.delta != b.delta) return a.delta < b.delta;
                     const double ta = a.theta.value_or(-1.0);
                     const double tb = b.theta.value_or(-1.0);
                     if (ta != tb) return ta < tb;
                     return a.method < b.method;
                   });
  return result;
}

AnalysisResult run_analysis(const AnalysisConfig& config) {
  const Dataset data = ingest_csv(config.input, config.roles);
  if (config.outcome_kind == "binary" && !outcome_is_binary(data))
    throw std::invalid_argument("run_analysis: outcome declared binary but has other values");
  if (config.outcome_kind == "continuous-nonneg" && data.y.minCoeff() < 0.0)
    throw std::invalid_argument(
        "run_analysis: outcome declared nonnegative but has negative values");
  AnalysisResult result = analyze_dataset(data, config);
  write_outputs(result, config);
  return result;
}

std::string render_results_json(const AnalysisResult& result) {
  json j;
  j["config_hash"] = result.hash;
  j["seed"] = result.seed;
  j["level"] = result.level;
  json rows = json::array();
  for (const auto& r : result.rows) {
    json row;
    row["estimand"] = r.estimand;
    row["lambda"] = r.lambda;
    row["delta"] = r.delta;
    row["theta"] = r.theta ? number_or_marker(*r.theta) : json(nullptr);
    row["method"] = r.method;
    row["bound_lower"] = number_or_marker(r.bound_lower);
    row["bound_upper"] = number_or_marker(r.bound_upper);
    row["se_lower"] = number_or_marker(r.se_lower);
    row["se_upper"] = number_or_marker(r.se_upper);
    row["ci_lower"] = number_or_marker(r.ci_lower);
    row["ci_upper"] = number_or_marker(r.ci_upper);
    row["na"] = r.na;
    row["note"] = r.note;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string render_results_csv(const AnalysisResult& result) {
  std::ostringstream os;
  os << "estimand,lambda,delta,theta,method,bound_lower,bound_upper,se_lower,se_upper,"
        "ci_lower,ci_upper,na,note\n";
  for (const auto& r : result.rows) {
    os << r.estimand << ',' << format_cell(r.lambda) << ',' << format_cell(r.delta) << ','
       << (r.theta ? format_cell(*r.theta) : "NA") << ',' << r.method << ','
       << format_cell(r.bound_lower) << ',' << format_cell(r.bound_upper) << ','
       << format_cell(r.se_lower) << ',' << format_cell(r.se_upper) << ','
       << format_cell(r.ci_lower) << ',' << format_cell(r.ci_upper) << ','
       << (r.na ? "1" : "0") << ',' << r.note << '\n';
  }
  return os.str();
}

std::string render_svg(const AnalysisResult& result, const std::string& estimand) {
  std::vector<const ResultRow*> rows;
  for (const auto& r : result.rows)
    if (r.estimand == estimand && !r.na && std::isfinite(r.ci_lower) && std::isfinite(r.ci_upper))
      rows.push_back(&r);

  const double width = 640, height = 400, margin = 50;
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
     << "'>\n";
  os << "<text x='" << width / 2 << "' y='20' text-anchor='middle'>" << estimand
     << " bounds vs lambda</text>\n";
  if (rows.empty()) {
    os << "<text x='" << width / 2 << "' y='" << height / 2
       << "' text-anchor='middle'>no rows</text>\n</svg>\n";
    return os.str();
  }
  double lo = rows[0]->ci_lower, hi = rows[0]->ci_upper;
  for (const auto* r : rows) {
    lo = std::min(lo, r->ci_lower);
    hi = std::max(hi, r->ci_upper);
  }
  if (hi <= lo) hi = lo + 1.0;
  const double span = hi - lo;
  auto ypos = [&](double v) {
    return height - margin - (v - lo) / span * (height - 2 * margin);
  };
  const double step = (width - 2 * margin) / static_cast<double>(rows.size());
  os << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
     << "' y2='" << height - margin << "' stroke='black'/>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto* r = rows[i];
    const double x = margin + step * (static_cast<double>(i) + 0.5);
    os << "<line x1='" << x << "' y1='" << ypos(r->ci_lower) << "' x2='" << x << "' y2='"
       << ypos(r->ci_upper) << "' stroke='steelblue' stroke-width='2'/>\n";
    os << "<rect x='" << x - 3 << "' y='" << ypos(r->bound_upper) - 3
       << "' width='6' height='6' fill='black'/>\n";
    os << "<rect x='" << x - 3 << "' y='" << ypos(r->bound_lower) - 3
       << "' width='6' height='6' fill='black'/>\n";
    os << "<text x='" << x << "' y='" << height - margin + 16
       << "' text-anchor='middle' font-size='9'>" << format_cell(r->lambda) << "/"
       << format_cell(r->delta) << "</text>\n";
  }
  os << "<text x='" << margin << "' y='" << height - margin + 32
     << "' font-size='9'>labels: lambda/delta</text>\n";
  os << "</svg>\n";
  return os.str();
}

void write_outputs(const AnalysisResult& result, const AnalysisConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  {
    std::ofstream out(fs::path(config.out_dir) / "results.json");
    out << render_results_json(result);
  }
  {
    std::ofstream out(fs::path(config.out_dir) / "results.csv");
    out << render_results_csv(result);
  }
  if (config.plots) {
    for (const char* estimand : {"mu1", "mu0", "ate", "crr"}) {
      std::ofstream out(fs::path(config.out_dir) / (std::string("fig_") + estimand + ".svg"));
      out << render_svg(result, estimand);
    }
  }
}

}  // namespace emsm
