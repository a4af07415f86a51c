#pragma once

// The flow t -> S(t) = I_{L, L'(t)}(S) in Wick-coefficient space, with
// L'(t) = e^{-t} L and w(t) = c(L) - c(L'(t)).
//
// In the moving basis (S(t) Wick-ordered by mu_{L'(t)}) the linear part of
// the flow is a pure relabeling, and the coefficients obey
//   dG/dt = sigma * sum_{n in F} wdot_n(t) d_n S d_{-n} S,
// which the Picard iteration solves through the variation-of-constants map.
// The RK4 path integrates the same equation in plain coordinates,
//   dS/dt = 1/2 sum_n wdot_n d_n d_{-n} S + sigma sum_n wdot_n d_n S d_{-n} S.
// sigma is a calibrated convention; heat-kernel bookkeeping gives -1/2.

#include "qlrg/actions.hpp"
#include "qlrg/covariance.hpp"
#include "qlrg/wick.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qlrg {

enum class SignConvention { lemma_plus, pde_minus, lemma_plus_half, pde_minus_half };

// +2, -2, +1/2, -1/2
double sign_factor(SignConvention s);
std::string to_string(SignConvention s);
SignConvention sign_from_string(const std::string& s);
inline constexpr SignConvention kAllSignConventions[] = {
    SignConvention::lemma_plus, SignConvention::pde_minus, SignConvention::lemma_plus_half,
    SignConvention::pde_minus_half};

struct CalibrationRecord {
  bool performed = false;
  SignConvention chosen = SignConvention::pde_minus_half;
  // chi^2 of each candidate's flow against pointwise MC of I
  std::vector<std::pair<SignConvention, double>> chi2;
  double lambda = 0.0;
  double t = 0.0;
  double coupling = 0.0;
  int psi_points = 0;
  int inner_samples = 0;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const CalibrationRecord& r);

struct CalibrationOptions {
  ModeSetPtr modes;
  double lambda = 4.0;
  CutoffProfile profile = CutoffProfile::exponential();
  double coupling = 1.0;   // coefficient of every key (n, -n), n != 0
  double t = 0.1;
  int psi_points = 8;
  int inner_samples = 200000;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Compares every candidate sign against the Monte Carlo integration-out map
// on a quadratic action at small t and picks the best fit.
CalibrationRecord calibrate_sign(const CalibrationOptions& opts);

// sigma * sum_n wdot_n(tau) d_n f d_{-n} f, with f ordered by mu_{L'(tau)}.
ProductResult nonlinear_term(const WickPoly& f, double tau, double lambda, double sigma,
                             int degree_cap);

QuasilocalityReport quasilocality_of_rhs(const WickPoly& f, double tau, double lambda, double sigma,
                                         int degree_cap);

// sqrt<g,g> + sum_n sqrt<d_n g, d_n g> under g's ordering measure.
double proxy_norm(const WickPoly& g);

struct PhiResult {
  std::vector<WickPoly> family;
  std::vector<double> dropped_mass;
};

// Phi(f)(t_i) = U(t_i, 0) S0 + trapezoid_{tau <= t_i} U(t_i, tau) N(f(tau), tau).
PhiResult phi_map(const std::vector<WickPoly>& family, const std::vector<double>& t_grid,
                  const WickPoly& S0, double sigma, int degree_cap, int workers = 1);

// sup_i proxy_norm(Phi(f)(t_i) - f(t_i))
double residual_norm(const std::vector<WickPoly>& family, const std::vector<double>& t_grid,
                     const WickPoly& S0, double sigma, int degree_cap, int workers = 1);

enum class FlowMethod { picard, rk4 };
std::string to_string(FlowMethod m);
FlowMethod flow_method_from_string(const std::string& s);

struct FlowOptions {
  double t_end = 0.2;
  FlowMethod method = FlowMethod::picard;
  int grid_nodes = 64;
  int max_iters = 60;
  double tol = 1e-12;
  int degree_cap = 6;
  SignConvention sign = SignConvention::pde_minus_half;
  int rk4_substeps = 1;
  int workers = 1;
};

struct FlowState {
  FlowMethod method = FlowMethod::picard;
  SignConvention sign = SignConvention::pde_minus_half;
  CalibrationRecord calibration;
  int degree_cap = 0;
  std::vector<double> t_grid;
  std::vector<WickPoly> snapshots;        // ordered by mu_{L'(t_i)}
  std::vector<double> dropped_mass;       // per node
  std::vector<double> node_residuals;     // picard: last |Phi(f) - f| per node
  std::vector<double> iteration_residuals;
  // max over nodes of the off-shell mass of every Picard iterate
  std::vector<double> iterate_off_shell_mass;
  bool converged = true;
  int iterations = 0;
  bool input_quasilocal = true;
};

FlowState flow_solve(const WickPoly& S0, const FlowOptions& opts);

// Per-key Richardson estimate of the Picard discretization error at t_end:
// 4/3 |G_h - G_{h/2}|, from runs on grid_nodes and 2 grid_nodes - 1 nodes.
std::map<Key, double> richardson_estimate(const WickPoly& S0, const FlowOptions& opts);

nlohmann::json to_json(const FlowState& s);
// One row per node: t, then re/im of every requested key.
std::string trajectory_csv(const FlowState& s, const std::vector<Key>& keys);

} // namespace qlrg
