#include "qlrg/harness.hpp"

#include "qlrg/error.hpp"
#include "qlrg/rg_linear.hpp"
#include "qlrg/serialize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace qlrg {

using nlohmann::json;

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  require(dim >= 1, "dim must be >= 1");
  require(nmax >= 1, "nmax must be >= 1");
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  require(!(lambda_lo && t_end), "give lambda_lo or t_end, not both");
  require(lambda_lo || t_end, "give lambda_lo or t_end");
  if (lambda_lo) require(*lambda_lo > 0.0 && *lambda_lo < lambda, "need 0 < lambda_lo < lambda");
  if (t_end) require(*t_end > 0.0 && std::isfinite(*t_end), "t_end must be positive");
  require(degree_cap >= 1, "degree_cap must be >= 1");
  require(seed > 0, "seed must be positive");
  require(workers >= 1, "workers must be >= 1");
  action().validate();
  require(action().dim == dim, "lagrangian dim differs from the window dim");
  mc_config().validate();
  require(flow.grid_nodes >= 2, "flow.grid_nodes must be >= 2");
  require(flow.max_iters >= 1, "flow.max_iters must be >= 1");
  require(flow.tol > 0.0, "flow.tol must be positive");
  require(flow.rk4_substeps >= 1, "flow.rk4_substeps must be >= 1");
  require(calibration.t > 0.0, "calibration.t must be positive");
  require(calibration.psi_points >= 1, "calibration.psi_points must be >= 1");
  require(calibration.inner_samples >= 10 && calibration.inner_samples % 10 == 0,
          "calibration.inner_samples must be a positive multiple of 10");
  require(!fejer.polynomial.empty(), "fejer.polynomial must be nonempty");
  require(fejer.beta_r > 0.0 && fejer.functional_beta_r > 0.0, "fejer radii must be positive");
  require(!fejer.orders.empty(), "fejer.orders must be nonempty");
  for (int o : fejer.orders) require(o >= 1, "fejer orders must be >= 1");
  require(fejer.samples >= 2, "fejer.samples must be >= 2");
  require(checks.exact_tol > 0.0, "checks.exact_tol must be positive");
  require(checks.wick_degree >= 0, "checks.wick_degree must be >= 0");
  require(checks.random_polys >= 1, "checks.random_polys must be >= 1");
  require(checks.max_degree >= 0, "checks.max_degree must be >= 0");
  require(checks.psi_draws >= 1, "checks.psi_draws must be >= 1");
  require(checks.k_sigma_offshell > 0.0 && checks.k_sigma_moment > 0.0, "k_sigma must be positive");
}

double ExperimentConfig::scale_lo() const {
  return lambda_lo ? *lambda_lo : flow_scale(lambda, flow_time());
}

double ExperimentConfig::flow_time() const {
  return lambda_lo ? std::log(lambda / *lambda_lo) : *t_end;
}

LagrangianSpec ExperimentConfig::action() const {
  return lagrangian ? *lagrangian : phi4_lagrangian(dim, coupling_lambda, coupling_m2);
}

McConfig ExperimentConfig::mc_config() const {
  McConfig m = mc;
  m.seed = seed;
  m.degree_cap = degree_cap;
  return m;
}

json to_json(const ExperimentConfig& c, bool with_out_dir) {
  json j;
  j["schema"] = kConfigSchema;
  j["dim"] = c.dim;
  j["nmax"] = c.nmax;
  j["lambda"] = c.lambda;
  if (c.lambda_lo) j["lambda_lo"] = *c.lambda_lo;
  if (c.t_end) j["t_end"] = *c.t_end;
  j["degree_cap"] = c.degree_cap;
  j["profile"] = to_json(c.profile);
  j["coupling"] = {{"lambda", c.coupling_lambda}, {"m2", c.coupling_m2}};
  if (c.lagrangian) j["lagrangian"] = to_json(*c.lagrangian);
  j["mc"] = {{"outer_samples", c.mc.outer_samples},
             {"inner_samples", c.mc.inner_samples},
             {"jackknife_blocks", c.mc.jackknife_blocks},
             {"subtract_linear", c.mc.subtract_linear}};
  j["flow"] = {{"method", to_string(c.flow.method)},
               {"grid_nodes", c.flow.grid_nodes},
               {"max_iters", c.flow.max_iters},
               {"tol", c.flow.tol},
               {"rk4_substeps", c.flow.rk4_substeps},
               {"sign", c.flow.sign ? to_string(*c.flow.sign) : std::string("calibrate")}};
  j["calibration"] = {{"t", c.calibration.t},
                      {"coupling", c.calibration.coupling},
                      {"psi_points", c.calibration.psi_points},
                      {"inner_samples", c.calibration.inner_samples}};
  j["fejer"] = {{"polynomial", c.fejer.polynomial},
                {"beta_r", c.fejer.beta_r},
                {"functional_beta_r", c.fejer.functional_beta_r},
                {"orders", c.fejer.orders},
                {"samples", c.fejer.samples}};
  j["checks"] = {{"exact_tol", c.checks.exact_tol},
                 {"wick_degree", c.checks.wick_degree},
                 {"random_polys", c.checks.random_polys},
                 {"max_degree", c.checks.max_degree},
                 {"psi_draws", c.checks.psi_draws},
                 {"k_sigma_offshell", c.checks.k_sigma_offshell},
                 {"k_sigma_moment", c.checks.k_sigma_moment}};
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  if (with_out_dir) j["out_dir"] = c.out_dir;
  return j;
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(ErrorCode::parse, where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail(ErrorCode::parse, "unknown field " + where + "." + k);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("field ") + key + ": " + e.what());
  }
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  T v{};
  read(j, key, v);
  out = v;
}

} // namespace

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config",
             {"schema", "dim", "nmax", "lambda", "lambda_lo", "t_end", "degree_cap", "profile",
              "coupling", "lagrangian", "mc", "flow", "calibration", "fejer", "checks", "seed",
              "workers", "out_dir"});
  if (j.contains("schema") && j.at("schema") != kConfigSchema)
    fail(ErrorCode::parse, "unsupported config schema " + j.at("schema").dump());
  ExperimentConfig c;
  read(j, "dim", c.dim);
  read(j, "nmax", c.nmax);
  read(j, "lambda", c.lambda);
  read_opt(j, "lambda_lo", c.lambda_lo);
  if (c.lambda_lo) c.t_end.reset();
  read_opt(j, "t_end", c.t_end);
  read(j, "degree_cap", c.degree_cap);
  read(j, "seed", c.seed);
  read(j, "workers", c.workers);
  read(j, "out_dir", c.out_dir);
  if (j.contains("profile")) c.profile = profile_from_json(j.at("profile"));
  if (j.contains("coupling")) {
    const auto& k = j.at("coupling");
    check_keys(k, "coupling", {"lambda", "m2"});
    read(k, "lambda", c.coupling_lambda);
    read(k, "m2", c.coupling_m2);
  }
  if (j.contains("lagrangian")) c.lagrangian = lagrangian_from_json(j.at("lagrangian"));
  if (j.contains("mc")) {
    const auto& k = j.at("mc");
    check_keys(k, "mc", {"outer_samples", "inner_samples", "jackknife_blocks", "subtract_linear"});
    read(k, "outer_samples", c.mc.outer_samples);
    read(k, "inner_samples", c.mc.inner_samples);
    read(k, "jackknife_blocks", c.mc.jackknife_blocks);
    read(k, "subtract_linear", c.mc.subtract_linear);
  }
  if (j.contains("flow")) {
    const auto& k = j.at("flow");
    check_keys(k, "flow", {"method", "grid_nodes", "max_iters", "tol", "rk4_substeps", "sign"});
    std::string method = to_string(c.flow.method);
    read(k, "method", method);
    c.flow.method = flow_method_from_string(method);
    read(k, "grid_nodes", c.flow.grid_nodes);
    read(k, "max_iters", c.flow.max_iters);
    read(k, "tol", c.flow.tol);
    read(k, "rk4_substeps", c.flow.rk4_substeps);
    if (k.contains("sign")) {
      std::string s;
      read(k, "sign", s);
      if (s == "calibrate")
        c.flow.sign.reset();
      else
        c.flow.sign = sign_from_string(s);
    }
  }
  if (j.contains("calibration")) {
    const auto& k = j.at("calibration");
    check_keys(k, "calibration", {"t", "coupling", "psi_points", "inner_samples"});
    read(k, "t", c.calibration.t);
    read(k, "coupling", c.calibration.coupling);
    read(k, "psi_points", c.calibration.psi_points);
    read(k, "inner_samples", c.calibration.inner_samples);
  }
  if (j.contains("fejer")) {
    const auto& k = j.at("fejer");
    check_keys(k, "fejer", {"polynomial", "beta_r", "functional_beta_r", "orders", "samples"});
    read(k, "polynomial", c.fejer.polynomial);
    read(k, "beta_r", c.fejer.beta_r);
    read(k, "functional_beta_r", c.fejer.functional_beta_r);
    read(k, "orders", c.fejer.orders);
    read(k, "samples", c.fejer.samples);
  }
  if (j.contains("checks")) {
    const auto& k = j.at("checks");
    check_keys(k, "checks",
               {"exact_tol", "wick_degree", "random_polys", "max_degree", "psi_draws",
                "k_sigma_offshell", "k_sigma_moment"});
    read(k, "exact_tol", c.checks.exact_tol);
    read(k, "wick_degree", c.checks.wick_degree);
    read(k, "random_polys", c.checks.random_polys);
    read(k, "max_degree", c.checks.max_degree);
    read(k, "psi_draws", c.checks.psi_draws);
    read(k, "k_sigma_offshell", c.checks.k_sigma_offshell);
    read(k, "k_sigma_moment", c.checks.k_sigma_moment);
  }
  c.validate();
  return c;
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json(c, false).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"wick-check",      "convolution-check", "integrate-out",
                                              "flow",            "compare-flow-mc",   "fejer-demo",
                                              "jensen-check"};
  return names;
}

// ---------------------------------------------------------------- runner

namespace {

class Timer {
public:
  void phase(const std::string& name, const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    phases_[name] = dt.count();
    total_ += dt.count();
  }
  json to_json() const { return {{"phases", phases_}, {"total_seconds", total_}}; }

private:
  std::map<std::string, double> phases_;
  double total_ = 0.0;
};

struct Context {
  const ExperimentConfig& cfg;
  ModeSetPtr modes;
  CovariancePtr hi;
  CovariancePtr lo;
  std::vector<Invariant> invariants;
  json results = json::object();
  CalibrationRecord calibration;
  std::map<std::string, std::string> files;
  Timer timer;

  explicit Context(const ExperimentConfig& c)
      : cfg(c),
        modes(build_mode_set(c.dim, c.nmax)),
        hi(make_covariance(modes, c.lambda, c.profile)),
        lo(make_covariance(modes, c.scale_lo(), c.profile)) {
    calibration.chosen = c.flow.sign.value_or(SignConvention::pde_minus_half);
  }

  void check(std::string name, bool hard, bool passed, double value, double threshold,
             std::string detail = {}) {
    invariants.push_back({std::move(name), hard, passed, value, threshold, std::move(detail)});
  }

  double scale_lo() const { return cfg.scale_lo(); }
  WickPoly action() const { return compile_local(cfg.action(), hi); }

  SignConvention sign() {
    if (cfg.flow.sign) return *cfg.flow.sign;
    if (!calibration.performed) {
      timer.phase("calibration", [&] {
        CalibrationOptions o;
        o.modes = modes;
        o.lambda = cfg.lambda;
        o.profile = cfg.profile;
        o.coupling = cfg.calibration.coupling;
        o.t = cfg.calibration.t;
        o.psi_points = cfg.calibration.psi_points;
        o.inner_samples = cfg.calibration.inner_samples;
        o.seed = cfg.seed;
        o.workers = cfg.workers;
        calibration = calibrate_sign(o);
      });
    }
    return calibration.chosen;
  }

  FlowOptions flow_options() {
    FlowOptions o;
    o.t_end = cfg.flow_time();
    o.method = cfg.flow.method;
    o.grid_nodes = cfg.flow.grid_nodes;
    o.max_iters = cfg.flow.max_iters;
    o.tol = cfg.flow.tol;
    o.degree_cap = cfg.degree_cap;
    o.sign = sign();
    o.rk4_substeps = cfg.flow.rk4_substeps;
    o.workers = cfg.workers;
    return o;
  }

  Key mass_key() const {
    std::vector<int> c(static_cast<std::size_t>(cfg.dim), 0);
    c[0] = 1;
    const Mode n(c);
    return canonical_key({static_cast<int>(modes->index_of(n)), static_cast<int>(modes->index_of(-n))});
  }
};

WickPoly random_poly(const std::vector<Key>& keys, const ModeSetPtr& modes, const CovariancePtr& ord,
                     RandomStream& rng, int terms) {
  WickPoly p(modes, ord);
  for (int t = 0; t < terms; ++t) {
    const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(keys.size()));
    p.add(keys[std::min(i, keys.size() - 1)], cplx(rng.normal(), rng.normal()));
  }
  return p;
}

// Sum over perfect pairings of the factors of `key`, each pair (a, b)
// weighted by weight(a) when b = -a and 0 otherwise.
double pairing_sum(std::vector<int> key, const ModeSet& modes, const std::function<double(int)>& weight) {
  if (key.empty()) return 1.0;
  if (key.size() % 2) return 0.0;
  const int a = key.back();
  key.pop_back();
  double s = 0.0;
  for (std::size_t j = 0; j < key.size(); ++j) {
    if (key[j] != static_cast<int>(modes.negated(static_cast<std::size_t>(a)))) continue;
    std::vector<int> rest = key;
    rest.erase(rest.begin() + static_cast<long>(j));
    s += weight(a) * pairing_sum(std::move(rest), modes, weight);
  }
  return s;
}

// Sum over bijections between the factors of a and b, pairs weighted by c(a)
// when the factors coincide.
double bijection_sum(const std::vector<int>& a, std::vector<int> b, const std::function<double(int)>& c) {
  if (a.size() != b.size()) return 0.0;
  if (a.empty()) return 1.0;
  const std::vector<int> ra(a.begin() + 1, a.end());
  double s = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] != a[0]) continue;
    std::vector<int> rb = b;
    rb.erase(rb.begin() + static_cast<long>(j));
    s += c(a[0]) * bijection_sum(ra, std::move(rb), c);
  }
  return s;
}

void run_wick_check(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double tol = cfg.checks.exact_tol;
  const auto keys = enumerate_keys(*ctx.modes, cfg.checks.wick_degree);
  const auto& hi = *ctx.hi;
  const auto& lo = *ctx.lo;

  double e_err = 0.0, e_self = 0.0;
  ctx.timer.phase("expectation", [&] {
    for (const auto& k : keys) {
      WickPoly p(ctx.modes, ctx.hi);
      p.add(k, 1.0);
      const double want =
          pairing_sum(k, *ctx.modes, [&](int a) { return lo[static_cast<std::size_t>(a)] - hi[static_cast<std::size_t>(a)]; });
      e_err = std::max(e_err, std::abs(expectation(p, lo) - want));
      e_self = std::max(e_self, std::abs(expectation(p, hi) - (k.empty() ? 1.0 : 0.0)));
    }
  });
  ctx.check("expectation_matches_pairings", true, e_err <= tol, e_err, tol);
  ctx.check("wick_monomials_centered", true, e_self <= tol, e_self, tol);

  double ip_err = 0.0;
  std::size_t pairs = 0;
  ctx.timer.phase("inner_product", [&] {
    std::vector<WickPoly> basis;
    for (const auto& k : keys) {
      basis.emplace_back(ctx.modes, ctx.hi);
      basis.back().add(k, 1.0);
    }
    for (std::size_t i = 0; i < keys.size(); ++i)
      for (std::size_t j = 0; j < keys.size(); ++j) {
        if (keys[i].size() != keys[j].size()) continue;
        ++pairs;
        const double want =
            bijection_sum(keys[i], keys[j], [&](int a) { return hi[static_cast<std::size_t>(a)]; });
        ip_err = std::max(ip_err, std::abs(inner_product(basis[i], basis[j]) - want));
      }
  });
  ctx.check("inner_product_matches_pairings", true, ip_err <= tol, ip_err, tol,
            std::to_string(pairs) + " equal-degree pairs");

  double rt_err = 0.0, mul_err = 0.0;
  ctx.timer.phase("algebra", [&] {
    RandomStream rng(cfg.seed, 0);
    const auto small = enumerate_keys(*ctx.modes, std::min(cfg.checks.max_degree, 3));
    const auto big = enumerate_keys(*ctx.modes, cfg.checks.max_degree);
    for (int t = 0; t < cfg.checks.random_polys; ++t) {
      const auto p = random_poly(big, ctx.modes, ctx.hi, rng, 8);
      const auto back = reorder(reorder(p, ctx.lo), ctx.hi);
      const auto diff = back - p;
      for (const auto& [k, v] : diff.terms()) rt_err = std::max(rt_err, std::abs(v));
      const auto a = random_poly(small, ctx.modes, ctx.hi, rng, 4);
      const auto b = random_poly(small, ctx.modes, ctx.hi, rng, 4);
      const auto prod = multiply(a, b).poly;
      const auto f = sample_field(hi, rng);
      const cplx want = evaluate(a, f) * evaluate(b, f);
      mul_err = std::max(mul_err, std::abs(evaluate(prod, f) - want) / std::max(1.0, std::abs(want)));
    }
  });
  ctx.check("reorder_round_trip", true, rt_err <= tol, rt_err, tol);
  ctx.check("product_matches_pointwise", true, mul_err <= tol, mul_err, tol, "relative error");
  ctx.results["keys"] = keys.size();
}

void run_convolution_check(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double tol = cfg.checks.exact_tol;
  const auto keys = enumerate_keys(*ctx.modes, cfg.checks.max_degree);
  std::vector<double> residuals;
  ctx.timer.phase("convolution", [&] {
    RandomStream rng(cfg.seed, 0);
    for (int t = 0; t < cfg.checks.random_polys; ++t)
      residuals.push_back(convolution_check(random_poly(keys, ctx.modes, ctx.hi, rng, 8), ctx.hi, ctx.scale_lo()));
  });
  const double worst = *std::max_element(residuals.begin(), residuals.end());
  ctx.check("convolution_identity", true, worst <= tol, worst, tol,
            std::to_string(residuals.size()) + " random polynomials");
  ctx.results["residuals"] = residuals;
}

std::string coeff_row(const Key& k, const ModeSet& modes, cplx v, double se) {
  std::ostringstream os;
  os << key_label(k, modes) << ',' << k.size() << ',' << (is_on_shell(k, modes) ? 1 : 0) << ','
     << format_double(v.real()) << ',' << format_double(v.imag()) << ',' << format_double(se);
  return os.str();
}

void run_integrate_out(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto S = ctx.action();
  ProjectedAction r{WickPoly(ctx.modes, ctx.lo), {}, false, 0.0};
  ctx.timer.phase("integrate_out", [&] { r = integrate_out(S, ctx.scale_lo(), cfg.mc_config(), cfg.workers); });
  const auto linear = u_apply(S, ctx.scale_lo());
  const auto& modes = *ctx.modes;

  double worst_off = 0.0;
  int off_keys = 0;
  std::ostringstream csv;
  csv << "key,degree,on_shell,re,im,std_error,linear_re,linear_im\n";
  for (const auto& [k, se] : r.std_error) {
    const cplx g = r.poly.coeff(k);
    const cplx l = linear.coeff(k);
    csv << coeff_row(k, modes, g, se) << ',' << format_double(l.real()) << ',' << format_double(l.imag())
        << '\n';
    if (!is_on_shell(k, modes)) {
      ++off_keys;
      worst_off = std::max(worst_off, se > 0.0 ? std::abs(g) / se : (g == 0.0 ? 0.0 : INFINITY));
    }
  }
  ctx.files["coeffs.csv"] = csv.str();
  const double k3 = cfg.checks.k_sigma_offshell;
  ctx.check("off_shell_null", false, worst_off <= k3, worst_off, k3,
            "max |G|/se over " + std::to_string(off_keys) + " off-shell keys");
  ctx.check("on_shell_resolved", false, !r.useless, r.useless ? 1.0 : 0.0, 0.0);

  const Key mk = ctx.mass_key();
  const double se = r.std_error.count(mk) ? r.std_error.at(mk) : 0.0;
  const double shift = se > 0.0 ? std::abs(r.poly.coeff(mk) - linear.coeff(mk)) / se : 0.0;
  const double k5 = cfg.checks.k_sigma_moment;
  ctx.check("nonlinearity_visible", false, shift > k5, shift, k5,
            "|G - G_linear|/se on " + key_label(mk, modes));
  ctx.results["input_quasilocal"] = is_quasilocal(S).quasilocal;
  ctx.results["off_shell_keys"] = off_keys;
  ctx.results["max_pointwise_error"] = r.max_pointwise_error;
  ctx.results["poly"] = to_json(r.poly);
}

void run_flow(Context& ctx) {
  const auto S = ctx.action();
  const auto opts = ctx.flow_options();
  FlowState st;
  ctx.timer.phase("flow", [&] { st = flow_solve(S, opts); });
  const auto& modes = *ctx.modes;

  if (opts.method == FlowMethod::picard) {
    ctx.check("converged", true, st.converged, st.iteration_residuals.empty() ? 0.0 : st.iteration_residuals.back(),
              opts.tol, std::to_string(st.iterations) + " iterations");
    const std::size_t n = std::min<std::size_t>(5, st.iteration_residuals.size());
    bool dec = true;
    for (std::size_t i = 1; i < n; ++i) dec = dec && st.iteration_residuals[i] < st.iteration_residuals[i - 1];
    ctx.check("residuals_decrease", true, dec, static_cast<double>(n), 5.0, "over the first iterations");
  }
  double off = 0.0;
  for (double m : st.iterate_off_shell_mass) off = std::max(off, m);
  for (const auto& s : st.snapshots) off = std::max(off, is_quasilocal(s).off_shell_mass);
  if (st.input_quasilocal)
    ctx.check("quasilocal_preserved", true, off == 0.0, off, 0.0, "max off-shell mass of iterates and snapshots");
  double dropped = 0.0;
  for (double d : st.dropped_mass) dropped = std::max(dropped, d);

  std::set<Key> keyset;
  for (const auto& s : st.snapshots)
    for (const auto& [k, v] : s.terms()) keyset.insert(k);
  ctx.files["trajectory.csv"] = trajectory_csv(st, {keyset.begin(), keyset.end()});
  std::ostringstream csv;
  csv << "key,degree,on_shell,re,im,std_error\n";
  for (const auto& [k, v] : st.snapshots.back().terms()) csv << coeff_row(k, modes, v, 0.0) << '\n';
  ctx.files["coeffs.csv"] = csv.str();
  ctx.results["input_quasilocal"] = st.input_quasilocal;
  ctx.results["max_dropped_mass"] = dropped;
  ctx.results["iterations"] = st.iterations;
  ctx.results["iteration_residuals"] = st.iteration_residuals;
  ctx.results["final"] = to_json(st.snapshots.back());
}

void run_compare(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto S = ctx.action();
  auto opts = ctx.flow_options();
  opts.method = FlowMethod::picard;
  WickPoly flow(ctx.modes, ctx.lo), wide(ctx.modes, ctx.lo);
  std::map<Key, double> rich;
  ctx.timer.phase("flow", [&] {
    flow = flow_solve(S, opts).snapshots.back();
    auto w = opts;
    w.degree_cap = opts.degree_cap + 2;
    wide = flow_solve(S, w).snapshots.back();
    rich = richardson_estimate(S, opts);
  });
  ProjectedAction mc{WickPoly(ctx.modes, ctx.lo), {}, false, 0.0};
  ctx.timer.phase("integrate_out", [&] { mc = integrate_out(S, ctx.scale_lo(), cfg.mc_config(), cfg.workers); });

  const auto& modes = *ctx.modes;
  const double k = cfg.checks.k_sigma_offshell;
  int fails = 0, resolved = 0;
  double worst = 0.0, z2 = 0.0;
  std::ostringstream csv;
  csv << "key,degree,on_shell,flow_re,flow_im,mc_re,mc_im,std_error,truncation,ratio\n";
  for (const auto& [key, se] : mc.std_error) {
    const cplx f = flow.coeff(key), m = mc.poly.coeff(key);
    const double trunc = std::abs(wide.coeff(key) - f) + (rich.count(key) ? rich.at(key) : 0.0);
    const double tol = std::max(k * se, trunc);
    const double dev = std::abs(f - m);
    const double ratio = tol > 0.0 ? dev / tol : (dev == 0.0 ? 0.0 : INFINITY);
    worst = std::max(worst, ratio);
    if (ratio > 1.0) ++fails;
    if (se > 0.0) {
      z2 += dev * dev / (se * se);
      ++resolved;
    }
    csv << key_label(key, modes) << ',' << key.size() << ',' << (is_on_shell(key, modes) ? 1 : 0) << ','
        << format_double(f.real()) << ',' << format_double(f.imag()) << ',' << format_double(m.real()) << ','
        << format_double(m.imag()) << ',' << format_double(se) << ',' << format_double(trunc) << ','
        << format_double(ratio) << '\n';
  }
  ctx.files["coeffs.csv"] = csv.str();
  ctx.check("flow_matches_mc", false, fails == 0, worst, 1.0,
            std::to_string(fails) + " keys outside max(k se, truncation)");
  ctx.results["keys"] = mc.std_error.size();
  // mean of |flow - mc|^2 / se^2; near 1 when the deviations are pure noise
  ctx.results["mean_z2"] = resolved ? z2 / resolved : 0.0;
  ctx.results["sign_convention"] = to_string(opts.sign);
}

void run_fejer(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& fj = cfg.fejer;
  json table = json::array();
  std::ostringstream csv;
  csv << "order,k,re,im\n";
  double prev = INFINITY, prev_l2 = INFINITY;
  bool dec = true, nonneg = true, bounded = true, l2_dec = true;
  double worst_min = INFINITY;
  ctx.timer.phase("approximants", [&] {
    for (int order : fj.orders) {
      const auto r = fejer_approximant(fj.polynomial, fj.beta_r, order);
      dec = dec && r.report.sup_error < prev;
      prev = r.report.sup_error;
      nonneg = nonneg && r.report.nonnegative;
      bounded = bounded && r.report.max_value <= r.report.bound + 1e-12;
      worst_min = std::min(worst_min, r.report.min_value);
      const auto& c = r.approximant.coefficients();
      for (std::size_t i = 0; i < c.size(); ++i)
        csv << order << ',' << i << ',' << format_double(c[i].real()) << ',' << format_double(c[i].imag()) << '\n';
      json row{{"order", order},
               {"half_period", r.report.half_period},
               {"sup_error", r.report.sup_error},
               {"min_value", r.report.min_value},
               {"max_value", r.report.max_value},
               {"bound", r.report.bound}};
      if (cfg.dim == 1) {
        const auto f = fejer_approximant(fj.polynomial, fj.functional_beta_r, order);
        const auto e = fejer_functional_l2(fj.polynomial, f.approximant, *ctx.hi, fj.samples, cfg.seed);
        l2_dec = l2_dec && e.l2 < prev_l2;
        prev_l2 = e.l2;
        row["functional_l2"] = e.l2;
        row["functional_std_error"] = e.std_error;
      }
      table.push_back(row);
    }
  });
  ctx.files["coeffs.csv"] = csv.str();
  ctx.check("sup_error_decreasing", true, dec, prev, 0.0);
  ctx.check("nonnegative", true, nonneg, worst_min, -1e-12);
  ctx.check("bounded_by_polynomial", true, bounded, 0.0, 1e-12);
  if (cfg.dim == 1) ctx.check("functional_l2_decreasing", false, l2_dec, prev_l2, 0.0);
  ctx.results["orders"] = table;
}

void run_jensen(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto S = ctx.action();
  JensenReport rep;
  ctx.timer.phase("jensen", [&] {
    rep = jensen_check(S, cfg.checks.psi_draws, ctx.scale_lo(), cfg.mc_config(), cfg.checks.k_sigma_offshell,
                       cfg.workers);
  });
  json entries = json::array();
  double worst = -INFINITY;
  for (const auto& e : rep.entries) {
    worst = std::max(worst, e.excess_sigma);
    entries.push_back({{"value", e.value},
                       {"std_error", e.std_error},
                       {"linear", e.linear},
                       {"excess_sigma", e.excess_sigma},
                       {"violation", e.violation}});
  }
  ctx.check("jensen_bound", false, rep.violations == 0, worst, rep.k_sigma,
            std::to_string(rep.violations) + " violations");
  ctx.results["entries"] = entries;
}

} // namespace

RunResult run_experiment(const std::string& subcommand, const ExperimentConfig& cfg) {
  const auto& names = subcommands();
  require(std::find(names.begin(), names.end(), subcommand) != names.end(), "unknown subcommand " + subcommand);
  cfg.validate();
  Context ctx(cfg);
  if (subcommand == "wick-check") run_wick_check(ctx);
  else if (subcommand == "convolution-check") run_convolution_check(ctx);
  else if (subcommand == "integrate-out") run_integrate_out(ctx);
  else if (subcommand == "flow") run_flow(ctx);
  else if (subcommand == "compare-flow-mc") run_compare(ctx);
  else if (subcommand == "fejer-demo") run_fejer(ctx);
  else run_jensen(ctx);

  RunResult out;
  bool hard = false, soft = false;
  json inv = json::array();
  for (const auto& i : ctx.invariants) {
    if (!i.passed) (i.hard ? hard : soft) = true;
    json row{{"name", i.name}, {"kind", i.hard ? "hard" : "soft"}, {"passed", i.passed}};
    row["value"] = std::isfinite(i.value) ? json(i.value) : json(nullptr);
    row["threshold"] = i.threshold;
    if (!i.detail.empty()) row["detail"] = i.detail;
    inv.push_back(row);
  }
  out.exit_code = hard ? 1 : soft ? 3 : 0;
  out.report = {{"format", kReportSchema},
                {"subcommand", subcommand},
                {"config_hash", config_hash(cfg)},
                {"config", to_json(cfg, false)},
                {"seed", cfg.seed},
                {"workers", cfg.workers},
                {"calibration", to_json(ctx.calibration)},
                {"invariants", inv},
                {"verdict", hard ? "hard_fail" : soft ? "soft_fail" : "pass"},
                {"exit_code", out.exit_code},
                {"results", ctx.results}};
  out.files = std::move(ctx.files);
  out.files["report.json"] = out.report.dump(2) + "\n";
  out.timings = ctx.timer.to_json();
  out.timings["subcommand"] = subcommand;
  return out;
}

void write_artifacts(const RunResult& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& body) {
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::io, "cannot write " + path.string());
    f << body;
    if (!f) fail(ErrorCode::io, "write failed for " + path.string());
  };
  for (const auto& [name, body] : r.files) put(name, body);
  put("timings.json", r.timings.dump(2) + "\n");
}

} // namespace qlrg
