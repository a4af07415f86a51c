#pragma once

// Experiment configuration, the subcommand runner and its artifacts.
//
// Config file (JSON, "schema": "qlrg.config/1"); every field is optional:
//   dim, nmax, lambda, lambda_lo | t_end, degree_cap, seed, workers, out_dir,
//   profile      { "kind": "exponential" } | { "kind": "table", "points": [[s, f], ...] }
//   coupling     { "lambda": 0.1, "m2": 1.0 }           lambda phi^4 + m2/2 phi^2
//   lagrangian   { "dim", "max_derivative_order", "terms" }   replaces coupling
//   mc           { outer_samples, inner_samples, jackknife_blocks, subtract_linear }
//   flow         { method, grid_nodes, max_iters, tol, rk4_substeps, sign }
//                sign is a convention name or "calibrate"
//   calibration  { t, coupling, psi_points, inner_samples }
//   fejer        { polynomial, beta_r, functional_beta_r, orders, samples }
//   checks       { exact_tol, wick_degree, random_polys, max_degree, psi_draws,
//                  k_sigma_offshell, k_sigma_moment }
// Unknown fields are rejected.

#include "qlrg/actions.hpp"
#include "qlrg/covariance.hpp"
#include "qlrg/polchinski.hpp"
#include "qlrg/rg_nonlinear.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qlrg {

inline constexpr const char* kConfigSchema = "qlrg.config/1";
inline constexpr const char* kReportSchema = "qlrg.report/1";

struct FlowSettings {
  FlowMethod method = FlowMethod::picard;
  int grid_nodes = 33;
  int max_iters = 60;
  double tol = 1e-12;
  int rk4_substeps = 1;
  std::optional<SignConvention> sign;  // empty: calibrate
};

struct CalibrationSettings {
  double t = 0.1;
  double coupling = 1.0;
  int psi_points = 8;
  int inner_samples = 200000;
};

struct FejerSettings {
  std::vector<double> polynomial{0.0, 0.0, 1.0};
  double beta_r = 1.0;
  double functional_beta_r = 4.0;
  std::vector<int> orders{8, 16, 32};
  int samples = 300;
};

struct CheckSettings {
  double exact_tol = 1e-10;
  int wick_degree = 6;
  int random_polys = 50;
  int max_degree = 4;
  int psi_draws = 50;
  double k_sigma_offshell = 3.0;
  double k_sigma_moment = 5.0;
};

struct ExperimentConfig {
  int dim = 1;
  int nmax = 2;
  double lambda = 4.0;
  std::optional<double> lambda_lo;
  std::optional<double> t_end = 0.2;  // lambda_lo = e^{-t_end} lambda
  int degree_cap = 4;
  CutoffProfile profile = CutoffProfile::exponential();
  double coupling_lambda = 0.1;
  double coupling_m2 = 1.0;
  std::optional<LagrangianSpec> lagrangian;
  McConfig mc;  // seed and degree_cap are taken from the top level
  FlowSettings flow;
  CalibrationSettings calibration;
  FejerSettings fejer;
  CheckSettings checks;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";

  void validate() const;
  double scale_lo() const;
  double flow_time() const;
  LagrangianSpec action() const;
  McConfig mc_config() const;
};

nlohmann::json to_json(const ExperimentConfig& c, bool with_out_dir = true);
ExperimentConfig config_from_json(const nlohmann::json& j);
// FNV-1a 64 of the canonical JSON form without out_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

const std::vector<std::string>& subcommands();

struct Invariant {
  std::string name;
  bool hard = true;
  bool passed = true;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct RunResult {
  nlohmann::json report;
  std::map<std::string, std::string> files;  // file name -> content, report.json included
  nlohmann::json timings;
  int exit_code = 0;  // 0 pass, 1 hard failure, 3 soft failure
};

RunResult run_experiment(const std::string& subcommand, const ExperimentConfig& cfg);
void write_artifacts(const RunResult& r, const std::string& dir);

} // namespace qlrg
