#include "doctest.h"

#include "qlrg/actions.hpp"
#include "qlrg/error.hpp"

#include <cmath>
#include <numbers>

using namespace qlrg;

namespace {

constexpr double kPi = std::numbers::pi;

// int L(phi, d phi) dx by an equispaced rule that is exact for the trig
// polynomials involved.
double quadrature(const FieldSample& f, double a4, double a2, double grad2_phi, int m = 64) {
  double s = 0.0;
  for (int j = 0; j < m; ++j) {
    const double x[1] = {static_cast<double>(j) / m};
    const int dx[1] = {0};
    const double phi = eval_derivative(f, {}, x);
    const double d = eval_derivative(f, dx, x);
    s += (a4 * std::pow(phi, 4) + a2 * phi * phi + grad2_phi * d * d * phi) / m;
  }
  return s;
}

} // namespace

TEST_CASE("compile_local examples") {
  auto modes = build_mode_set(1, 2);
  auto cov = make_covariance(modes, 3.0);

  LagrangianSpec lin;
  lin.terms.push_back({1.0, {{{}, 1}}});
  auto p = compile_local(lin, cov);
  CHECK(p.size() == 1);
  CHECK(p.coeff({Mode{0}}) == cplx(1.0));

  LagrangianSpec sq;
  sq.terms.push_back({1.0, {{{}, 2}}});
  auto q = compile_local(sq, cov);
  double total = 0.0;
  for (std::size_t i = 0; i < modes->size(); ++i) total += (*cov)[i];
  CHECK(q.coeff({Mode{0}, Mode{0}}) == cplx(1.0));
  CHECK(q.coeff({Mode{1}, Mode{-1}}) == cplx(2.0));
  CHECK(q.coeff({Mode{2}, Mode{-2}}) == cplx(2.0));
  CHECK(std::abs(q.coeff(Key{}) - total) < 1e-15);

  LagrangianSpec grad;
  grad.max_derivative_order = 1;
  grad.terms.push_back({1.0, {{{0}, 2}}});
  auto g = compile_local(grad, cov);
  auto gp = wick_to_plain(g);
  CHECK(gp.coeff({Mode{0}, Mode{0}}) == cplx(0.0));
  CHECK(std::abs(gp.coeff({Mode{1}, Mode{-1}}) - 2.0 * std::pow(2 * kPi, 2)) < 1e-12);
  CHECK(std::abs(gp.coeff({Mode{2}, Mode{-2}}) - 2.0 * std::pow(4 * kPi, 2)) < 1e-12);
  double shift = 0.0;
  for (std::size_t i = 0; i < modes->size(); ++i) shift += std::pow(2 * kPi * (*modes)[i][0], 2) * (*cov)[i];
  CHECK(std::abs(g.coeff(Key{}) - shift) < 1e-12);
}

TEST_CASE("compile_local agrees with torus quadrature") {
  auto modes = build_mode_set(1, 2);
  auto cov = make_covariance(modes, 2.0);
  LagrangianSpec spec;
  spec.max_derivative_order = 1;
  spec.terms.push_back({0.3, {{{}, 4}}});
  spec.terms.push_back({0.7, {{{}, 2}}});
  spec.terms.push_back({0.2, {{{0}, 2}, {{}, 1}}});
  auto p = compile_local(spec, cov);
  CHECK(p.real_flag());
  CHECK(p.check_reality(1e-12));
  RandomStream rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = sample_field(*cov, rng).scaled(1.5);
    const cplx v = evaluate(p, f);
    CHECK(std::abs(v.imag()) < 1e-10);
    CHECK(v.real() == doctest::Approx(quadrature(f, 0.3, 0.7, 0.2)).epsilon(1e-10));
  }
}

TEST_CASE("compile_local output is exactly quasilocal") {
  auto modes = build_mode_set(2, 1);
  auto cov = make_covariance(modes, 2.0);
  LagrangianSpec spec;
  spec.dim = 2;
  spec.max_derivative_order = 2;
  spec.terms.push_back({1.0, {{{}, 4}}});
  spec.terms.push_back({-0.5, {{{0, 1}, 1}, {{1}, 1}, {{}, 1}}});
  auto p = compile_local(spec, cov);
  const auto q = is_quasilocal(p);
  CHECK(q.quasilocal);
  CHECK(q.off_shell_mass == 0.0);
  CHECK_THROWS_AS(compile_local(spec, cov, 3), Error);
}

TEST_CASE("Lagrangian JSON") {
  auto spec = lagrangian_from_json(nlohmann::json::parse(
      R"({"dim": 1, "max_derivative_order": 1, "terms": [[0.1, [[], 4]], [0.5, [[0], 2]]]})"));
  CHECK(spec.terms.size() == 2);
  CHECK(spec.terms[1].factors[0].axes == std::vector<int>{0});
  CHECK(spec.degree() == 4);
  CHECK(lagrangian_from_json(to_json(spec)).terms[0].coefficient == 0.1);
  CHECK_THROWS_AS(lagrangian_from_json(nlohmann::json::parse(R"({"terms": [[1.0, [[0], 2]]]})")), Error);
  CHECK_THROWS_AS(lagrangian_from_json(nlohmann::json::parse(R"({"terms": [[1.0, [[], 0]]]})")), Error);
  CHECK_THROWS_AS(lagrangian_from_json(nlohmann::json::parse(R"({"terms": 3})")), Error);
}

TEST_CASE("is_quasilocal examples") {
  auto modes = build_mode_set(1, 2);
  auto cov = make_covariance(modes, 2.0);
  WickPoly a(modes, cov), b(modes, cov);
  a.add({Mode{1}, Mode{-1}}, 1.0);
  b.add({Mode{1}, Mode{1}}, 1.0);
  CHECK(is_quasilocal(a).quasilocal);
  CHECK(is_quasilocal(a).off_shell_mass == 0.0);
  const auto r = is_quasilocal(b);
  CHECK_FALSE(r.quasilocal);
  CHECK(r.off_shell_mass == doctest::Approx(2.0 * std::pow((*cov)[modes->index_of(Mode{1})], 2)));
}

TEST_CASE("cylindrical_project examples") {
  auto modes = build_mode_set(1, 2);
  auto cov = make_covariance(modes, 2.0);
  auto sub = build_mode_set(1, 1);
  WickPoly p(modes, cov);
  p.add({Mode{2}, Mode{-2}}, 1.0);
  p.add({Mode{1}, Mode{-1}}, 1.0);
  p.set_real_flag(true);
  auto same = cylindrical_project(p, modes);
  CHECK(same.terms() == p.terms());
  auto q = cylindrical_project(p, sub);
  CHECK(q.size() == 1);
  CHECK(q.coeff({Mode{1}, Mode{-1}}) == cplx(1.0));
  CHECK(q.ordering()->lambda() == 2.0);
  CHECK(*q.modes() == *sub);
  CHECK(is_quasilocal(q).off_shell_mass == 0.0);
  CHECK_THROWS_AS(cylindrical_project(q, modes), Error);
}

TEST_CASE("cylindrical_project equals the Monte Carlo conditional expectation") {
  auto modes = build_mode_set(1, 2);
  auto cov = make_covariance(modes, 3.0);
  auto sub = build_mode_set(1, 1);
  const auto keys = enumerate_keys(*modes, 4);
  RandomStream rng(77);
  const int n = 20000;
  for (int trial = 0; trial < 10; ++trial) {
    WickPoly p(modes, cov);
    for (int t = 0; t < 6; ++t)
      p.add(keys[static_cast<std::size_t>(rng.uniform() * static_cast<double>(keys.size()))],
            cplx(rng.normal(), rng.normal()));
    const auto proj = cylindrical_project(p, sub);
    // fix the in-window modes, resample the rest
    const auto fixed = sample_field(*cov, rng);
    std::vector<cplx> sub_vals(sub->size());
    for (std::size_t i = 0; i < sub->size(); ++i) sub_vals[i] = fixed.at((*sub)[i]);
    const cplx expect = evaluate(proj, FieldSample::from_full(sub, sub_vals));
    const PlainEvaluator eval(wick_to_plain(p));
    std::vector<cplx> buf(modes->size());
    cplx s = 0.0;
    double ss = 0.0;
    RandomStream mc(500, static_cast<std::uint64_t>(trial));
    for (int k = 0; k < n; ++k) {
      sample_gaussian_into(*modes, cov->diagonal(), mc, buf);
      for (std::size_t i = 0; i < modes->size(); ++i)
        if (sub->find((*modes)[i])) buf[i] = fixed[i];
      const cplx v = eval(buf);
      s += v;
      ss += std::norm(v);
    }
    const cplx mean = s / static_cast<double>(n);
    const double se = std::sqrt((ss / n - std::norm(mean)) / n);
    CHECK(std::abs(mean - expect) < 5 * se + 1e-12);
  }
}

TEST_CASE("fejer_approximant of a constant is exact") {
  auto r = fejer_approximant({1.0}, 1.0, 8);
  CHECK(r.report.sup_error == 0.0);
  CHECK(r.approximant(0.3) == 1.0);
  CHECK(r.report.nonnegative);
}

TEST_CASE("fejer_approximant of z^2") {
  double prev = INFINITY;
  for (int order : {8, 16, 32}) {
    auto r = fejer_approximant({0.0, 0.0, 1.0}, 1.0, order);
    CHECK(r.report.sup_error < prev);
    prev = r.report.sup_error;
    CHECK(r.report.min_value >= -1e-12);
    CHECK(r.report.max_value <= r.report.bound + 1e-12);
    CHECK(r.report.half_period == 2.0);
  }
  CHECK_THROWS_AS(fejer_approximant({-0.1, 0.0, 1.0}, 1.0, 8), Error);
  CHECK_THROWS_AS(fejer_approximant({1.0}, 1.0, 0), Error);
}

TEST_CASE("Fourier coefficients by integration by parts match quadrature") {
  // The Fejer weights at order 2 are 1 and 1/2.
  const std::vector<double> poly{1.0, -0.5, 0.25, 0.0, 0.1};
  auto r = fejer_approximant(poly, 1.0, 2);
  const double L = r.report.half_period;
  const int m = 20000;
  cplx c0 = 0.0, c1 = 0.0;
  for (int j = 0; j < m; ++j) {
    const double z = -L + 2 * L * (j + 0.5) / m;
    const double v = eval_polynomial(poly, z);
    c0 += v / static_cast<double>(m);
    c1 += v * std::polar(1.0, -kPi * z / L) / static_cast<double>(m);
  }
  CHECK(std::abs(r.approximant.coefficients()[0] - c0) < 1e-6);
  CHECK(std::abs(r.approximant.coefficients()[1] - 0.5 * c1) < 1e-6);
}

TEST_CASE("composed Fejer functional approaches the polynomial functional in L2") {
  auto modes = build_mode_set(1, 2);
  Covariance cov(modes, 4.0);
  double prev = INFINITY;
  for (int order : {8, 16, 32}) {
    auto r = fejer_approximant({0.0, 0.0, 1.0}, 4.0, order);
    const auto e = fejer_functional_l2({0.0, 0.0, 1.0}, r.approximant, cov, 300, 9);
    CHECK(e.l2 < prev);
    prev = e.l2;
  }
}

TEST_CASE("lower_bound_estimate") {
  auto modes = build_mode_set(1, 2);
  auto cov = make_covariance(modes, 2.0);
  RandomStream rng(12);
  CHECK(lower_bound_estimate(WickPoly::constant(modes, cov, 3.0), 10, rng).value == 3.0);

  WickPoly sq(modes, cov);
  sq.add({Mode{0}, Mode{0}}, 1.0);
  sq.add(Key{}, (*cov)[modes->zero_index()]);
  sq.set_real_flag(true);
  const auto few = lower_bound_estimate(sq, 10, rng);
  const auto many = lower_bound_estimate(sq, 10000, rng);
  CHECK(few.value >= -1e-12);
  CHECK(many.value >= -1e-12);
  CHECK(many.value <= few.value);
  CHECK(many.value < 1e-4);
  CHECK(many.empirical_only);
  CHECK(many.samples == 10000);

  auto quartic = compile_local(phi4_lagrangian(1, 0.1, 1.0), cov);
  const auto lb = lower_bound_estimate(quartic, 2000, rng);
  CHECK(std::isfinite(lb.value));
  CHECK(lb.value > -10.0);
}
