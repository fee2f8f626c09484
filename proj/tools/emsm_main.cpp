#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "emsm/bounds.hpp"
#include "emsm/dv.hpp"
#include "emsm/oracle.hpp"
#include "emsm/report.hpp"
#include "emsm/stats.hpp"
#include "emsm/synthetic.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json j;
  in >> j;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  out << text;
}

json number_or_marker(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return v;
}

emsm::SensitivityParams params_from_json(const json& j) {
  const double l1 = j.value("lambda1", 1.0);
  const double l2 = j.value("lambda2", 1.0);
  emsm::OutcomeSpec spec = emsm::OutcomeSpec::msm();
  if (j.contains("delta"))
    spec = emsm::OutcomeSpec::recommended(j.at("delta").get<double>());
  else if (j.contains("delta1"))
    spec = emsm::OutcomeSpec::explicit_deltas(j.at("delta1").get<double>(),
                                              j.at("delta2").get<double>());
  return {l1, l2, spec};
}

emsm::DiscreteDistribution dist_from_json(const json& j, const char* support_key,
                                          const char* probs_key) {
  return {j.at(support_key).get<std::vector<double>>(),
          j.at(probs_key).get<std::vector<double>>()};
}

int cmd_bounds(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_json(config_path);
  json rows = json::array();

  const double p1 = cfg.at("stratum").at("p1").get<double>();
  const double p0 = cfg.at("stratum").at("p0").get<double>();
  const double pt1 = cfg.at("stratum").at("prob_t1").get<double>();
  const emsm::BinaryStratum stratum(p1, p0, pt1);

  for (double lambda : cfg.at("lambda_grid").get<std::vector<double>>()) {
    const double tau = emsm::quantile_level(1.0 / lambda, lambda);
    for (double delta : cfg.at("delta_grid").get<std::vector<double>>()) {
      const emsm::SensitivityParams params =
          emsm::SensitivityParams::symmetric(lambda, emsm::OutcomeSpec::recommended(delta));
      const emsm::BoundResult b1 = emsm::emsm_binary_bounds(p1, 1.0 - pt1, params);
      const emsm::BoundResult b0 = emsm::emsm_binary_bounds0(p0, pt1, params);
      json row;
      row["model"] = "emsm";
      row["lambda"] = lambda;
      row["delta"] = delta;
      row["mu1"] = {number_or_marker(b1.mu_lower), number_or_marker(b1.mu_upper)};
      row["mu0"] = {number_or_marker(b0.mu_lower), number_or_marker(b0.mu_upper)};
      row["ate"] = {number_or_marker(b1.mu_lower - b0.mu_upper),
                    number_or_marker(b1.mu_upper - b0.mu_lower)};
      rows.push_back(row);

      for (double theta : emsm::aligned_theta_grid(delta, tau)) {
        const emsm::DvParams dv(theta, 1.0 / lambda, lambda);
        const emsm::DvSharpBounds sharp = emsm::dv_sharp_bounds(stratum, dv);
        json dr;
        dr["model"] = "dv-sharp";
        dr["lambda"] = lambda;
        dr["delta"] = delta;
        dr["theta"] = number_or_marker(theta);
        dr["mu1"] = {number_or_marker(sharp.mu1_lower), number_or_marker(sharp.mu1_upper)};
        dr["mu0"] = {number_or_marker(sharp.mu0_lower), number_or_marker(sharp.mu0_upper)};
        dr["ate"] = {number_or_marker(sharp.mu1_lower - sharp.mu0_upper),
                     number_or_marker(sharp.mu1_upper - sharp.mu0_lower)};
        if (sharp.crr.defined)
          dr["crr"] = {number_or_marker(sharp.crr.lower), number_or_marker(sharp.crr.upper)};
        rows.push_back(dr);
      }
    }
  }

  json out;
  out["rows"] = rows;
  write_text(std::filesystem::path(out_dir) / "results.json", out.dump(2) + "\n");
  std::cout << "wrote " << (std::filesystem::path(out_dir) / "results.json").string() << "\n";
  return 0;
}

int cmd_oracle(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_json(config_path);
  const json& inst = cfg.at("instance");
  emsm::oracle::DiscreteInstance instance(
      dist_from_json(inst, "y1_support", "y1_probs"),
      dist_from_json(inst, "y0_support", "y0_probs"), inst.value("prob_t1", 0.5),
      params_from_json(cfg.at("params")));
  const int resolution = cfg.value("grid_resolution", 200);

  const emsm::oracle::EnumerationResult up =
      emsm::oracle::enumerate_emsm_bound(instance, resolution, true);
  const emsm::oracle::EnumerationResult lo =
      emsm::oracle::enumerate_emsm_bound(instance, resolution, false);
  const emsm::ConditionalSummary summary = emsm::ConditionalSummary::from_distributions(
      instance.y_treated, instance.y_control, instance.prob_t1, instance.params);
  const emsm::BoundResult formula = emsm::emsm_conditional_bounds(instance.params, summary);

  std::vector<double> q_grid = instance.y_treated.support();
  const emsm::oracle::DualityScanResult dual = emsm::oracle::duality_scan(instance, q_grid);

  json out;
  out["formula_nu_upper"] = formula.nu_upper;
  out["formula_nu_lower"] = formula.nu_lower;
  out["search_nu_upper"] = up.max_found;
  out["search_nu_lower"] = lo.max_found;
  out["upper_gap"] = formula.nu_upper - up.max_found;
  out["lower_gap"] = lo.max_found - formula.nu_lower;
  out["grid_slack"] = std::max(up.grid_slack, lo.grid_slack);
  out["dual_min"] = dual.min_value;
  out["dual_argmin_q"] = dual.argmin_q;
  out["dual_contains_quantile"] = dual.contains_q_star;
  write_text(std::filesystem::path(out_dir) / "oracle.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  const json cfg = load_json(config_path);
  const std::string flavor_name = cfg.value("flavor", "all-correct");
  emsm::DgpFlavor flavor = emsm::DgpFlavor::AllCorrect;
  if (flavor_name == "pi-misspec")
    flavor = emsm::DgpFlavor::PropensityMisspecified;
  else if (flavor_name == "mean-misspec")
    flavor = emsm::DgpFlavor::MeanMisspecified;
  else if (flavor_name != "all-correct")
    throw std::runtime_error("simulate: unknown flavor '" + flavor_name + "'");

  const emsm::SyntheticDgp dgp =
      emsm::make_binary_dgp(flavor, cfg.value("lambda", 2.0), cfg.value("delta", 0.5),
                            cfg.value("n", static_cast<std::size_t>(1000)));
  const emsm::Dataset data = emsm::generate_synthetic(dgp, seed);
  const emsm::SyntheticTruth truth = emsm::dgp_truth(dgp);

  std::filesystem::create_directories(out_dir);
  emsm::write_csv((std::filesystem::path(out_dir) / "data.csv").string(), data);

  json t;
  t["seed"] = seed;
  t["flavor"] = flavor_name;
  t["mu1_upper"] = truth.bounds.mu1_upper;
  t["mu1_lower"] = truth.bounds.mu1_lower;
  t["mu0_upper"] = truth.bounds.mu0_upper;
  t["mu0_lower"] = truth.bounds.mu0_lower;
  t["ate_upper"] = truth.bounds.ate_upper;
  t["ate_lower"] = truth.bounds.ate_lower;
  t["mu1_identified"] = truth.mu1_identified;
  t["mu0_identified"] = truth.mu0_identified;
  json psis = json::array();
  for (const auto& s : truth.strata) psis.push_back(s.psi_plus);
  t["psi_plus_per_stratum"] = psis;
  write_text(std::filesystem::path(out_dir) / "truth.json", t.dump(2) + "\n");
  std::cout << "wrote data.csv and truth.json under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensitivity analysis of causal effects under unmeasured confounding"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool plots = false;
  bool seed_given = false, out_given = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* copt = cmd->add_option("--config", config_path, "JSON configuration file");
    if (needs_config) copt->required();
    cmd->add_option("--seed", seed, "random seed override")->each([&](const std::string&) {
      seed_given = true;
    });
    cmd->add_option("--out-dir", out_dir, "output directory override")->each(
        [&](const std::string&) { out_given = true; });
    cmd->add_flag("--plots", plots, "also write SVG figures");
  };

  auto* bounds = app.add_subcommand("bounds", "closed-form population bounds (no data)");
  add_common(bounds);
  auto* estimate = app.add_subcommand("estimate", "doubly robust sample bounds (CAL/RCAL)");
  add_common(estimate);
  auto* dv = app.add_subcommand("dv", "ratio-constraint bounds with bootstrap intervals");
  add_common(dv);
  auto* orc = app.add_subcommand("oracle", "brute-force verification on a discrete instance");
  add_common(orc);
  auto* sim = app.add_subcommand("simulate", "synthetic data with closed-form true bounds");
  add_common(sim);

  CLI11_PARSE(app, argc, argv);

  try {
    if (bounds->parsed()) return cmd_bounds(config_path, out_given ? out_dir : "out");
    if (orc->parsed()) return cmd_oracle(config_path, out_given ? out_dir : "out");
    if (sim->parsed()) return cmd_simulate(config_path, seed_given ? seed : 0, out_given ? out_dir : "out");
    if (estimate->parsed() || dv->parsed()) {
      emsm::AnalysisConfig cfg = emsm::parse_config_file(config_path);
      if (seed_given) cfg.seed = seed;
      if (out_given) cfg.out_dir = out_dir;
      if (plots) cfg.plots = true;
      if (dv->parsed() && cfg.method != "DV")
        throw std::runtime_error("dv subcommand requires method = DV in the config");
      if (estimate->parsed() && cfg.method == "DV")
        throw std::runtime_error("estimate subcommand requires method = CAL or RCAL");
      const emsm::AnalysisResult result = emsm::run_analysis(cfg);
      std::cout << "wrote " << result.rows.size() << " rows under " << cfg.out_dir
                << " (config " << result.hash << ")\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
