#include "qlrg/polchinski.hpp"

#include "qlrg/error.hpp"
#include "qlrg/parallel.hpp"
#include "qlrg/rg_nonlinear.hpp"
#include "qlrg/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qlrg {

using nlohmann::json;

double sign_factor(SignConvention s) {
  switch (s) {
  case SignConvention::lemma_plus: return 2.0;
  case SignConvention::pde_minus: return -2.0;
  case SignConvention::lemma_plus_half: return 0.5;
  case SignConvention::pde_minus_half: return -0.5;
  }
  return 0.0;
}

std::string to_string(SignConvention s) {
  switch (s) {
  case SignConvention::lemma_plus: return "lemma_plus";
  case SignConvention::pde_minus: return "pde_minus";
  case SignConvention::lemma_plus_half: return "lemma_plus_half";
  case SignConvention::pde_minus_half: return "pde_minus_half";
  }
  return "?";
}

SignConvention sign_from_string(const std::string& s) {
  for (auto c : kAllSignConventions)
    if (to_string(c) == s) return c;
  fail(ErrorCode::parse, "unknown sign convention: " + s);
}

std::string to_string(FlowMethod m) { return m == FlowMethod::picard ? "picard" : "rk4"; }

FlowMethod flow_method_from_string(const std::string& s) {
  if (s == "picard") return FlowMethod::picard;
  if (s == "rk4") return FlowMethod::rk4;
  fail(ErrorCode::parse, "unknown flow method: " + s);
}

json to_json(const CalibrationRecord& r) {
  json chi = json::object();
  for (const auto& [c, v] : r.chi2) chi[to_string(c)] = v;
  return {{"performed", r.performed},   {"chosen", to_string(r.chosen)},
          {"sigma", sign_factor(r.chosen)}, {"chi2", chi},
          {"lambda", r.lambda},         {"t", r.t},
          {"coupling", r.coupling},     {"psi_points", r.psi_points},
          {"inner_samples", r.inner_samples}, {"seed", r.seed}};
}

namespace {

CovariancePtr node_ordering(const Covariance& base, double t) {
  return make_covariance(base.modes(), flow_scale(base.lambda(), t), base.profile());
}

void check_grid(const std::vector<double>& t) {
  require(t.size() >= 2, "flow grid needs at least two nodes");
  require(t.front() == 0.0, "flow grid starts at 0");
  for (std::size_t i = 1; i < t.size(); ++i) require(t[i] > t[i - 1], "flow grid must increase");
}

std::vector<double> uniform_grid(double t_end, int nodes) {
  require(t_end > 0.0 && std::isfinite(t_end), "t_end must be positive");
  require(nodes >= 2, "grid_nodes must be >= 2");
  std::vector<double> t(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) t[static_cast<std::size_t>(i)] = t_end * i / (nodes - 1);
  t.back() = t_end;
  return t;
}

double max_off_shell(const std::vector<WickPoly>& family) {
  double m = 0.0;
  for (const auto& f : family) m = std::max(m, is_quasilocal(f).off_shell_mass);
  return m;
}

} // namespace

ProductResult nonlinear_term(const WickPoly& f, double tau, double lambda, double sigma,
                             int degree_cap) {
  require(!f.is_plain(), "nonlinear term needs a Wick-ordered polynomial");
  require(tau >= 0.0, "tau must be nonnegative");
  const auto& ord = *f.ordering();
  const double expected = flow_scale(lambda, tau);
  require(std::abs(ord.lambda() - expected) <= 1e-12 * expected,
          "polynomial is not ordered by mu_{L'(tau)}");
  const auto& modes = *f.modes();
  ProductResult out{WickPoly(f.modes(), f.ordering(), degree_cap), 0.0};
  MultiplyOptions mo;
  mo.degree_cap = degree_cap;
  double dropped_root = 0.0;
  for (std::size_t r : modes.representatives()) {
    const double wd = kdot_at(tau, lambda, modes[r], ord.profile());
    if (wd == 0.0) continue;
    const WickPoly dn = derivative(f, r);
    if (dn.empty()) continue;
    const WickPoly dm = derivative(f, modes.negated(r));
    if (dm.empty()) continue;
    // d_n f d_{-n} f and d_{-n} f d_n f coincide
    const auto prod = multiply(dn, dm, mo);
    const double scale = 2.0 * sigma * wd;
    out.poly.add_coefficients(prod.poly, scale);
    dropped_root += std::abs(scale) * std::sqrt(prod.dropped_mass);
  }
  // Minkowski bound on the mass of the summed dropped parts.
  out.dropped_mass = dropped_root * dropped_root;
  out.poly.set_real_flag(f.real_flag());
  return out;
}

QuasilocalityReport quasilocality_of_rhs(const WickPoly& f, double tau, double lambda, double sigma,
                                         int degree_cap) {
  return is_quasilocal(nonlinear_term(f, tau, lambda, sigma, degree_cap).poly, 0.0);
}

double proxy_norm(const WickPoly& g) {
  double s = norm(g);
  for (std::size_t n = 0; n < g.modes()->size(); ++n) {
    const WickPoly d = derivative(g, n);
    if (!d.empty()) s += norm(d);
  }
  return s;
}

PhiResult phi_map(const std::vector<WickPoly>& family, const std::vector<double>& t_grid,
                  const WickPoly& S0, double sigma, int degree_cap, int workers) {
  check_grid(t_grid);
  require(family.size() == t_grid.size(), "family and grid sizes differ");
  require(!S0.is_plain(), "S0 must be Wick-ordered");
  require(S0.degree() <= degree_cap, "S0 degree exceeds the degree cap");
  const Covariance& base = *S0.ordering();
  const std::size_t n = t_grid.size();

  std::vector<ProductResult> rhs(n, ProductResult{WickPoly(S0.modes(), nullptr), 0.0});
  parallel_for(n, workers, [&](std::size_t i) {
    rhs[i] = nonlinear_term(family[i], t_grid[i], base.lambda(), sigma, degree_cap);
  });

  PhiResult out;
  out.family.reserve(n);
  out.dropped_mass.resize(n);
  WickPoly acc = S0.with_degree_cap(degree_cap);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double h = 0.5 * (t_grid[i] - t_grid[i - 1]);
      acc.add_coefficients(rhs[i - 1].poly, h);
      acc.add_coefficients(rhs[i].poly, h);
    }
    WickPoly node = acc.retagged(node_ordering(base, t_grid[i]));
    node.set_real_flag(S0.real_flag());
    out.family.push_back(std::move(node));
    out.dropped_mass[i] = rhs[i].dropped_mass;
  }
  return out;
}

double residual_norm(const std::vector<WickPoly>& family, const std::vector<double>& t_grid,
                     const WickPoly& S0, double sigma, int degree_cap, int workers) {
  const auto phi = phi_map(family, t_grid, S0, sigma, degree_cap, workers);
  double r = 0.0;
  for (std::size_t i = 0; i < family.size(); ++i) r = std::max(r, proxy_norm(phi.family[i] - family[i]));
  return r;
}

namespace {

// 1/2 sum_n wdot_n d_n d_{-n} S + sigma sum_n wdot_n d_n S d_{-n} S, plain in
// and out; the product is formed and truncated in the Wick basis of L'(t).
WickPoly rk4_rhs(const WickPoly& S, double t, const Covariance& base, double sigma, int cap,
                 double* dropped) {
  const auto& modes = *S.modes();
  WickPoly out(S.modes(), nullptr, cap);
  for (std::size_t r : modes.representatives()) {
    const double wd = kdot_at(t, base.lambda(), modes[r], base.profile());
    if (wd == 0.0) continue;
    // n and -n give the same second derivative
    out.add_coefficients(derivative(derivative(S, r), modes.negated(r)), wd);
  }
  const auto ord = node_ordering(base, t);
  const auto nl = nonlinear_term(plain_to_wick(S, ord), t, base.lambda(), sigma, cap);
  if (dropped) *dropped = std::max(*dropped, nl.dropped_mass);
  out.add_coefficients(wick_to_plain(nl.poly), 1.0);
  return out;
}

FlowState solve_rk4(const WickPoly& S0, const std::vector<double>& grid, const FlowOptions& o) {
  const Covariance& base = *S0.ordering();
  const double sigma = sign_factor(o.sign);
  require(o.rk4_substeps >= 1, "rk4_substeps must be >= 1");
  FlowState st;
  WickPoly S = wick_to_plain(S0).with_degree_cap(o.degree_cap);
  st.snapshots.push_back(S0.with_degree_cap(o.degree_cap));
  st.dropped_mass.push_back(0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double dropped = 0.0;
    const double H = grid[i] - grid[i - 1];
    const double h = H / o.rk4_substeps;
    for (int s = 0; s < o.rk4_substeps; ++s) {
      const double t = grid[i - 1] + s * h;
      const WickPoly k1 = rk4_rhs(S, t, base, sigma, o.degree_cap, &dropped);
      WickPoly y = S;
      y.add_coefficients(k1, h / 2);
      const WickPoly k2 = rk4_rhs(y, t + h / 2, base, sigma, o.degree_cap, &dropped);
      y = S;
      y.add_coefficients(k2, h / 2);
      const WickPoly k3 = rk4_rhs(y, t + h / 2, base, sigma, o.degree_cap, &dropped);
      y = S;
      y.add_coefficients(k3, h);
      const WickPoly k4 = rk4_rhs(y, t + h, base, sigma, o.degree_cap, &dropped);
      S.add_coefficients(k1, h / 6);
      S.add_coefficients(k2, h / 3);
      S.add_coefficients(k3, h / 3);
      S.add_coefficients(k4, h / 6);
    }
    WickPoly snap = plain_to_wick(S, node_ordering(base, grid[i]));
    snap.set_real_flag(S0.real_flag());
    st.snapshots.push_back(std::move(snap));
    st.dropped_mass.push_back(dropped);
  }
  st.node_residuals.assign(grid.size(), 0.0);
  return st;
}

FlowState solve_picard(const WickPoly& S0, const std::vector<double>& grid, const FlowOptions& o) {
  const Covariance& base = *S0.ordering();
  const double sigma = sign_factor(o.sign);
  require(o.max_iters >= 1, "max_iters must be >= 1");
  FlowState st;
  // starting point t -> U(t, 0) S0
  std::vector<WickPoly> f;
  for (double t : grid) {
    WickPoly node = S0.with_degree_cap(o.degree_cap).retagged(node_ordering(base, t));
    f.push_back(std::move(node));
  }
  st.iterate_off_shell_mass.push_back(max_off_shell(f));
  st.converged = false;
  for (int it = 0; it < o.max_iters; ++it) {
    auto phi = phi_map(f, grid, S0, sigma, o.degree_cap, o.workers);
    std::vector<double> res(grid.size());
    parallel_for(grid.size(), o.workers,
                 [&](std::size_t i) { res[i] = proxy_norm(phi.family[i] - f[i]); });
    const double r = *std::max_element(res.begin(), res.end());
    st.iteration_residuals.push_back(r);
    st.node_residuals = std::move(res);
    st.dropped_mass = std::move(phi.dropped_mass);
    f = std::move(phi.family);
    st.iterate_off_shell_mass.push_back(max_off_shell(f));
    st.iterations = it + 1;
    if (r < o.tol) {
      st.converged = true;
      break;
    }
  }
  st.snapshots = std::move(f);
  return st;
}

} // namespace

FlowState flow_solve(const WickPoly& S0, const FlowOptions& opts) {
  require(!S0.is_plain(), "S0 must be Wick-ordered w.r.t. mu_L");
  require(opts.degree_cap >= 0, "degree_cap must be >= 0");
  require(S0.degree() <= opts.degree_cap, "S0 degree exceeds the flow degree cap");
  const auto grid = uniform_grid(opts.t_end, opts.grid_nodes);
  FlowState st = opts.method == FlowMethod::picard ? solve_picard(S0, grid, opts)
                                                   : solve_rk4(S0, grid, opts);
  st.method = opts.method;
  st.sign = opts.sign;
  st.degree_cap = opts.degree_cap;
  st.t_grid = grid;
  st.input_quasilocal = is_quasilocal(S0).quasilocal;
  return st;
}

std::map<Key, double> richardson_estimate(const WickPoly& S0, const FlowOptions& opts) {
  FlowOptions coarse = opts, fine = opts;
  coarse.method = fine.method = FlowMethod::picard;
  fine.grid_nodes = 2 * opts.grid_nodes - 1;
  const auto a = flow_solve(S0, coarse).snapshots.back();
  const auto b = flow_solve(S0, fine).snapshots.back();
  std::map<Key, double> out;
  for (const auto& [k, v] : a.terms()) out[k] = 4.0 / 3.0 * std::abs(v - b.coeff(k));
  for (const auto& [k, v] : b.terms())
    if (!out.count(k)) out[k] = 4.0 / 3.0 * std::abs(v);
  return out;
}

CalibrationRecord calibrate_sign(const CalibrationOptions& o) {
  require(o.modes != nullptr, "calibration needs a window");
  require(o.t > 0.0, "calibration time must be positive");
  require(o.psi_points >= 1, "calibration needs psi points");
  const auto hi = make_covariance(o.modes, o.lambda, o.profile);
  const double lambda_lo = flow_scale(o.lambda, o.t);
  const auto lo = make_covariance(o.modes, lambda_lo, o.profile);

  WickPoly S(o.modes, hi, 2);
  for (std::size_t r : o.modes->representatives()) S.add(Key{static_cast<int>(r), static_cast<int>(o.modes->negated(r))}, o.coupling);
  S.set_real_flag(true);

  McConfig mc;
  mc.inner_samples = o.inner_samples;
  mc.jackknife_blocks = 10;
  mc.seed = o.seed;
  mc.degree_cap = 2;
  const std::size_t P = static_cast<std::size_t>(o.psi_points);
  std::vector<FieldSample> psis;
  for (std::size_t j = 0; j < P; ++j) {
    RandomStream rng(o.seed, psi_stream(j));
    psis.push_back(sample_field(*lo, rng));
  }
  std::vector<PointwiseEstimate> mcv(P);
  parallel_for(P, o.workers, [&](std::size_t j) {
    mcv[j] = integrate_out_pointwise(S, psis[j], lambda_lo, mc, inner_stream(j));
  });

  CalibrationRecord rec;
  rec.performed = true;
  rec.lambda = o.lambda;
  rec.t = o.t;
  rec.coupling = o.coupling;
  rec.psi_points = o.psi_points;
  rec.inner_samples = o.inner_samples;
  rec.seed = o.seed;
  double best = std::numeric_limits<double>::infinity();
  for (auto c : kAllSignConventions) {
    FlowOptions fo;
    fo.t_end = o.t;
    fo.method = FlowMethod::rk4;
    fo.grid_nodes = 17;
    fo.degree_cap = 2;
    fo.sign = c;
    const auto st = flow_solve(S, fo);
    double chi2 = 0.0;
    for (std::size_t j = 0; j < P; ++j) {
      const double pred = evaluate(st.snapshots.back(), psis[j]).real();
      const double z = (pred - mcv[j].value) / std::max(mcv[j].std_error, 1e-300);
      chi2 += z * z;
    }
    rec.chi2.emplace_back(c, chi2);
    if (chi2 < best) {
      best = chi2;
      rec.chosen = c;
    }
  }
  return rec;
}

json to_json(const FlowState& s) {
  json nodes = json::array();
  for (std::size_t i = 0; i < s.snapshots.size(); ++i) {
    nodes.push_back({{"t", s.t_grid[i]},
                     {"lambda", s.snapshots[i].ordering()->lambda()},
                     {"dropped_mass", s.dropped_mass[i]},
                     {"residual", i < s.node_residuals.size() ? s.node_residuals[i] : 0.0},
                     {"off_shell_mass", is_quasilocal(s.snapshots[i]).off_shell_mass},
                     {"poly", to_json(s.snapshots[i])}});
  }
  return {{"format", "qlrg.flowstate/1"},
          {"method", to_string(s.method)},
          {"sign_convention", to_string(s.sign)},
          {"sigma", sign_factor(s.sign)},
          {"calibration", to_json(s.calibration)},
          {"degree_cap", s.degree_cap},
          {"converged", s.converged},
          {"iterations", s.iterations},
          {"input_quasilocal", s.input_quasilocal},
          {"iteration_residuals", s.iteration_residuals},
          {"iterate_off_shell_mass", s.iterate_off_shell_mass},
          {"nodes", nodes}};
}

std::string trajectory_csv(const FlowState& s, const std::vector<Key>& keys) {
  std::ostringstream os;
  os << "t,lambda";
  const auto& modes = *s.snapshots.front().modes();
  for (const auto& k : keys) {
    const std::string label = key_label(k, modes);
    os << ",re" << label << ",im" << label;
  }
  os << ",dropped_mass\n";
  for (std::size_t i = 0; i < s.snapshots.size(); ++i) {
    os << format_double(s.t_grid[i]) << ',' << format_double(s.snapshots[i].ordering()->lambda());
    for (const auto& k : keys) {
      const cplx v = s.snapshots[i].coeff(k);
      os << ',' << format_double(v.real()) << ',' << format_double(v.imag());
    }
    os << ',' << format_double(s.dropped_mass[i]) << '\n';
  }
  return os.str();
}

} // namespace qlrg
