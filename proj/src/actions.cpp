#include "qlrg/actions.hpp"

#include "qlrg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace qlrg {

using nlohmann::json;

int LagrangianSpec::degree() const {
  int d = 0;
  for (const auto& t : terms) {
    int k = 0;
    for (const auto& f : t.factors) k += f.power;
    d = std::max(d, k);
  }
  return d;
}

void LagrangianSpec::validate() const {
  require(dim >= 1, "Lagrangian dimension must be >= 1");
  require(max_derivative_order >= 0, "max derivative order must be >= 0");
  for (const auto& t : terms) {
    require(std::isfinite(t.coefficient), "Lagrangian coefficient must be finite");
    for (const auto& f : t.factors) {
      require(f.power >= 1, "factor powers must be >= 1");
      require(static_cast<int>(f.axes.size()) <= max_derivative_order,
              "derivative order exceeds max_derivative_order");
      for (int a : f.axes) require(a >= 0 && a < dim, "derivative axis out of range");
    }
  }
}

LagrangianSpec lagrangian_from_json(const json& j) {
  LagrangianSpec spec;
  try {
    spec.dim = j.value("dim", 1);
    spec.max_derivative_order = j.value("max_derivative_order", 0);
    for (const auto& t : j.at("terms")) {
      if (!t.is_array() || t.empty()) fail(ErrorCode::parse, "Lagrangian term must be [coef, factors...]");
      LagrangianTerm term;
      term.coefficient = t.at(0).get<double>();
      for (std::size_t i = 1; i < t.size(); ++i)
        term.factors.push_back({t[i].at(0).get<std::vector<int>>(), t[i].at(1).get<int>()});
      spec.terms.push_back(std::move(term));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("malformed Lagrangian: ") + e.what());
  }
  spec.validate();
  return spec;
}

json to_json(const LagrangianSpec& spec) {
  json terms = json::array();
  for (const auto& t : spec.terms) {
    json term = json::array({t.coefficient});
    for (const auto& f : t.factors) term.push_back(json::array({f.axes, f.power}));
    terms.push_back(term);
  }
  return {{"dim", spec.dim}, {"max_derivative_order", spec.max_derivative_order}, {"terms", terms}};
}

LagrangianSpec phi4_lagrangian(int dim, double lambda, double m2) {
  LagrangianSpec spec;
  spec.dim = dim;
  spec.terms.push_back({lambda, {{{}, 4}}});
  spec.terms.push_back({0.5 * m2, {{{}, 2}}});
  return spec;
}

namespace {

struct TermExpander {
  const ModeSet& modes;
  std::vector<const std::vector<int>*> slots;
  std::map<Key, cplx>& out;
  Key chosen;
  std::vector<int> momentum;

  cplx slot_weight(std::size_t slot, std::size_t ordinal) const {
    cplx w = 1.0;
    const Mode& n = modes[ordinal];
    for (int axis : *slots[slot]) w *= cplx(0.0, 2.0 * std::numbers::pi * n[axis]);
    return w;
  }

  void run(std::size_t slot, cplx weight) {
    if (slot + 1 == slots.size()) {
      std::vector<int> last(momentum.size());
      for (std::size_t a = 0; a < last.size(); ++a) last[a] = -momentum[a];
      const auto idx = modes.find(Mode(std::move(last)));
      if (!idx) return;
      const cplx w = weight * slot_weight(slot, *idx);
      if (w == cplx(0.0)) return;
      Key key = chosen;
      key.push_back(static_cast<int>(*idx));
      out[canonical_key(std::move(key))] += w;
      return;
    }
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const cplx w = weight * slot_weight(slot, i);
      if (w == cplx(0.0)) continue;
      const Mode& n = modes[i];
      for (std::size_t a = 0; a < momentum.size(); ++a) momentum[a] += n[static_cast<int>(a)];
      chosen.push_back(static_cast<int>(i));
      run(slot + 1, w);
      chosen.pop_back();
      for (std::size_t a = 0; a < momentum.size(); ++a) momentum[a] -= n[static_cast<int>(a)];
    }
  }
};

} // namespace

WickPoly compile_local(const LagrangianSpec& spec, const CovariancePtr& ordering, int degree_cap) {
  spec.validate();
  require(ordering != nullptr, "compile_local needs an ordering covariance");
  const auto& modes = ordering->modes();
  require(modes->dim() == spec.dim, "Lagrangian and window dimensions differ");
  if (spec.degree() > degree_cap)
    fail(ErrorCode::truncation_overflow, "Lagrangian degree exceeds the degree cap");

  std::map<Key, cplx> acc;
  for (const auto& term : spec.terms) {
    if (term.coefficient == 0.0) continue;
    std::vector<const std::vector<int>*> slots;
    for (const auto& f : term.factors)
      for (int k = 0; k < f.power; ++k) slots.push_back(&f.axes);
    if (slots.empty()) {
      acc[Key{}] += term.coefficient;
      continue;
    }
    TermExpander ex{*modes, slots, acc, {}, std::vector<int>(static_cast<std::size_t>(spec.dim), 0)};
    ex.run(0, term.coefficient);
  }
  WickPoly plain(modes, nullptr);
  for (auto& [k, v] : acc) plain.add(k, v);
  WickPoly out = plain_to_wick(plain, ordering).with_degree_cap(degree_cap);
  out.set_real_flag(true);
  return out;
}

QuasilocalityReport is_quasilocal(const WickPoly& p, double tol) {
  QuasilocalityReport r;
  const auto& modes = *p.modes();
  for (const auto& [k, v] : p.terms()) {
    if (is_on_shell(k, modes)) continue;
    const double w = p.is_plain() ? 1.0 : monomial_norm(k, p.ordering()->diagonal());
    r.off_shell_mass += std::norm(v) * w;
  }
  r.quasilocal = r.off_shell_mass <= tol;
  return r;
}

WickPoly cylindrical_project(const WickPoly& p, const ModeSetPtr& sub) {
  require(sub != nullptr, "null sub-window");
  const auto& modes = *p.modes();
  require(sub->dim() == modes.dim(), "sub-window dimension differs");
  require(modes.contains(*sub), "sub-window is not contained in the polynomial's window");
  std::vector<int> remap(modes.size(), -1);
  for (std::size_t i = 0; i < modes.size(); ++i)
    if (auto j = sub->find(modes[i])) remap[i] = static_cast<int>(*j);

  CovariancePtr ordering;
  if (!p.is_plain()) ordering = std::make_shared<const Covariance>(p.ordering()->restricted(sub));
  WickPoly out(sub, ordering, p.degree_cap());
  for (const auto& [k, v] : p.terms()) {
    Key nk;
    bool inside = true;
    for (int i : k) {
      const int j = remap[static_cast<std::size_t>(i)];
      if (j < 0) {
        inside = false;
        break;
      }
      nk.push_back(j);
    }
    if (inside) out.add(std::move(nk), v);
  }
  out.set_real_flag(p.real_flag());
  return out;
}

TrigPolynomial::TrigPolynomial(double half_period, std::vector<cplx> coefficients)
    : half_period_(half_period), coeffs_(std::move(coefficients)) {
  require(half_period_ > 0.0, "half period must be positive");
  require(!coeffs_.empty(), "trigonometric polynomial needs at least one coefficient");
}

double TrigPolynomial::operator()(double z) const {
  double s = coeffs_[0].real();
  const double w = std::numbers::pi * z / half_period_;
  for (std::size_t k = 1; k < coeffs_.size(); ++k)
    s += 2.0 * (coeffs_[k] * std::polar(1.0, w * static_cast<double>(k))).real();
  return s;
}

double eval_polynomial(const std::vector<double>& poly, double z) {
  double s = 0.0;
  for (auto it = poly.rbegin(); it != poly.rend(); ++it) s = s * z + *it;
  return s;
}

namespace {

std::vector<double> poly_derivative(const std::vector<double>& p) {
  std::vector<double> d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(p[i] * static_cast<double>(i));
  return d;
}

// (1 / 2L) int_{-L}^{L} P(z) e^{-i pi k z / L} dz by repeated integration by
// parts; e^{-+ i pi k} = (-1)^k is used exactly.
cplx fourier_coefficient(const std::vector<double>& poly, double L, int k) {
  if (k == 0) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const double e = static_cast<double>(i + 1);
      s += poly[i] * (std::pow(L, e) - std::pow(-L, e)) / e;
    }
    return s / (2.0 * L);
  }
  const cplx iw(0.0, std::numbers::pi * k / L);
  cplx sum = 0.0;
  cplx denom = iw;
  for (auto d = poly; !d.empty(); d = poly_derivative(d)) {
    sum += (eval_polynomial(d, L) - eval_polynomial(d, -L)) / denom;
    denom *= iw;
  }
  const double sign = (k % 2) ? -1.0 : 1.0;
  return -sign * sum / (2.0 * L);
}

} // namespace

FejerResult fejer_approximant(const std::vector<double>& poly, double beta_r, int order, double beta,
                              int grid_points) {
  require(!poly.empty(), "polynomial must have at least one coefficient");
  require(beta_r > 0.0, "beta R must be positive");
  require(beta > 0.0, "beta must be positive");
  require(order >= 1, "Fejer order must be >= 1");
  require(grid_points >= 3, "grid needs at least 3 points");
  const double L = beta_r + beta;

  FejerReport rep;
  rep.half_period = L;
  rep.bound = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double z = -L + 2.0 * L * i / (grid_points - 1);
    const double v = eval_polynomial(poly, z);
    if (v < -1e-12) fail(ErrorCode::invalid_argument, "polynomial is negative on the periodization domain");
    rep.bound = std::max(rep.bound, v);
  }

  std::vector<cplx> c(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k)
    c[static_cast<std::size_t>(k)] =
        (1.0 - static_cast<double>(k) / order) * fourier_coefficient(poly, L, k);
  TrigPolynomial t(L, std::move(c));

  rep.min_value = std::numeric_limits<double>::infinity();
  rep.max_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double z = -L + 2.0 * L * i / (grid_points - 1);
    const double v = t(z);
    rep.min_value = std::min(rep.min_value, v);
    rep.max_value = std::max(rep.max_value, v);
    const double zi = -beta_r + 2.0 * beta_r * i / (grid_points - 1);
    rep.sup_error = std::max(rep.sup_error, std::abs(t(zi) - eval_polynomial(poly, zi)));
  }
  rep.nonnegative = rep.min_value >= -1e-12;
  return {std::move(t), rep};
}

FunctionalError fejer_functional_l2(const std::vector<double>& poly, const TrigPolynomial& t,
                                    const Covariance& cov, int samples, std::uint64_t seed,
                                    int quad_points) {
  require(cov.modes()->dim() == 1, "functional comparison is one-dimensional");
  require(samples >= 2, "need at least two samples");
  require(quad_points >= 1, "need at least one quadrature point");
  RandomStream rng(seed);
  double s = 0.0, ss = 0.0;
  for (int j = 0; j < samples; ++j) {
    const FieldSample f = sample_field(cov, rng);
    double diff = 0.0;
    for (int q = 0; q < quad_points; ++q) {
      const double x[1] = {static_cast<double>(q) / quad_points};
      const double phi = eval_derivative(f, {}, x);
      diff += (t(phi) - eval_polynomial(poly, phi)) / quad_points;
    }
    s += diff * diff;
    ss += diff * diff * diff * diff;
  }
  const double n = samples;
  const double mean = s / n;
  const double var = std::max(0.0, ss / n - mean * mean);
  FunctionalError out;
  out.l2 = std::sqrt(mean);
  // delta method for the square root
  out.std_error = mean > 0.0 ? std::sqrt(var / n) / (2.0 * out.l2) : 0.0;
  out.samples = samples;
  return out;
}

LowerBoundEstimate lower_bound_estimate(const WickPoly& p, int samples, RandomStream& rng) {
  require(p.real_flag(), "lower bound needs a real-flagged polynomial");
  require(!p.is_plain(), "lower bound samples the ordering measure; polynomial must be Wick-ordered");
  require(samples >= 1, "need at least one sample");
  const PlainEvaluator eval(wick_to_plain(p));
  const auto& modes = *p.modes();
  std::vector<cplx> buf(modes.size());
  LowerBoundEstimate r;
  r.value = std::numeric_limits<double>::infinity();
  for (int j = 0; j < samples; ++j) {
    sample_gaussian_into(modes, p.ordering()->diagonal(), rng, buf);
    r.value = std::min(r.value, eval(buf).real());
  }
  r.samples = samples;
  return r;
}

} // namespace qlrg
