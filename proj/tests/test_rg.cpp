#include "doctest.h"
#include "oracle.hpp"

#include "qlrg/actions.hpp"
#include "qlrg/error.hpp"
#include "qlrg/rg_linear.hpp"
#include "qlrg/rg_nonlinear.hpp"

#include <cmath>

using namespace qlrg;

namespace {

struct Window {
  ModeSetPtr modes = build_mode_set(1, 2);
  double lambda = 4.0;
  double lambda_lo = 2.0;
  CovariancePtr hi = make_covariance(modes, lambda);
  CovariancePtr lo = make_covariance(modes, lambda_lo);
  WindowCovariance w{*hi, *lo};

  WickPoly random_poly(RandomStream& rng, int max_degree, int n_terms) const {
    const auto keys = enumerate_keys(*modes, max_degree);
    WickPoly p(modes, hi);
    for (int t = 0; t < n_terms; ++t)
      p.add(keys[static_cast<std::size_t>(rng.uniform() * static_cast<double>(keys.size()))],
            cplx(rng.normal(), rng.normal()));
    return p;
  }

  std::size_t idx(int n) const { return modes->index_of(Mode{n}); }
};

} // namespace

TEST_CASE_FIXTURE(Window, "u_apply basics") {
  WickPoly p(modes, hi);
  p.add({Mode{1}, Mode{-1}}, 0.7);
  p.add(Key{}, 2.0);
  p.set_real_flag(true);
  auto q = u_apply(p, lambda_lo);
  CHECK(q.terms() == p.terms());
  CHECK(q.ordering()->lambda() == lambda_lo);
  CHECK(q.real_flag());
  CHECK_THROWS_AS(u_apply(p, lambda), Error);
  CHECK_THROWS_AS(u_apply(p, 5.0), Error);
  CHECK_THROWS_AS(u_apply(wick_to_plain(p), 1.0), Error);

  // semigroup law
  CHECK(u_apply(u_apply(p, 3.0), lambda_lo).terms() == u_apply(p, lambda_lo).terms());
  CHECK(same_ordering(u_apply(u_apply(p, 3.0), lambda_lo).ordering(), u_apply(p, lambda_lo).ordering()));

  // approaching the identity
  auto near = u_apply(p, lambda * (1 - 1e-12));
  RandomStream rng(1);
  auto f = sample_field(*hi, rng);
  CHECK(std::abs(evaluate(near, f) - evaluate(p, f)) < 1e-10);
}

TEST_CASE_FIXTURE(Window, "u_apply equals the Gaussian convolution by the window measure") {
  WickPoly p(modes, hi);
  p.add({Mode{1}, Mode{-1}}, 1.0);
  const auto q = u_apply(p, lambda_lo);
  const PlainEvaluator eval(wick_to_plain(p));
  RandomStream rng(3);
  const int n = 100000;
  std::vector<cplx> buf(modes->size());
  for (int trial = 0; trial < 10; ++trial) {
    const auto psi = sample_field(*lo, rng);
    const auto full = psi.full();
    double s = 0.0, ss = 0.0;
    RandomStream mc(20, static_cast<std::uint64_t>(trial));
    for (int k = 0; k < n; ++k) {
      sample_gaussian_into(*modes, w.diagonal(), mc, buf);
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += full[i];
      const double v = eval(buf).real();
      s += v;
      ss += v * v;
    }
    const double mean = s / n, se = std::sqrt((ss / n - mean * mean) / n);
    CHECK(std::abs(mean - evaluate(q, psi).real()) < 5 * se);
  }
}

TEST_CASE_FIXTURE(Window, "ou_apply") {
  RandomStream rng(5);
  auto p = random_poly(rng, 4, 10);
  CHECK(ou_apply(p, 0.0).terms() == p.terms());
  WickPoly d2(modes, hi);
  d2.add({Mode{1}, Mode{2}}, 1.0);
  CHECK(ou_apply(d2, 0.5).coeff({Mode{1}, Mode{2}}).real() == doctest::Approx(std::exp(-1.0)));
  auto a = ou_apply(ou_apply(p, 0.2), 0.3);
  auto b = ou_apply(p, 0.5);
  for (const auto& [k, v] : b.terms()) CHECK(std::abs(a.coeff(k) - v) < 1e-14);
  auto ql = compile_local(phi4_lagrangian(1, 0.1, 1.0), hi);
  CHECK(is_quasilocal(ou_apply(ql, 0.7)).off_shell_mass == 0.0);
  CHECK_THROWS_AS(ou_apply(p, -0.1), Error);
}

TEST_CASE_FIXTURE(Window, "ou_apply equals the Mehler integral") {
  // O(tau) S[phi] = int S[e^{-tau} phi + sqrt(1 - e^{-2 tau}) chi] dmu[chi]
  WickPoly p(modes, hi);
  p.add({Mode{1}, Mode{-1}}, 1.0);
  p.add({Mode{0}, Mode{0}, Mode{2}, Mode{-2}}, 0.5);
  const double tau = 0.4;
  const auto q = ou_apply(p, tau);
  const PlainEvaluator eval(wick_to_plain(p));
  RandomStream rng(8);
  const int n = 100000;
  const double a = std::exp(-tau), b = std::sqrt(1 - std::exp(-2 * tau));
  std::vector<cplx> buf(modes->size());
  for (int trial = 0; trial < 5; ++trial) {
    const auto phi = sample_field(*hi, rng);
    const auto full = phi.full();
    double s = 0.0, ss = 0.0;
    RandomStream mc(30, static_cast<std::uint64_t>(trial));
    for (int k = 0; k < n; ++k) {
      sample_gaussian_into(*modes, hi->diagonal(), mc, buf);
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = a * full[i] + b * buf[i];
      const double v = eval(buf).real();
      s += v;
      ss += v * v;
    }
    const double mean = s / n, se = std::sqrt((ss / n - mean * mean) / n);
    CHECK(std::abs(mean - evaluate(q, phi).real()) < 5 * se);
  }
}

TEST_CASE_FIXTURE(Window, "convolution_check") {
  CHECK(convolution_check(WickPoly::constant(modes, hi, 2.5), hi, lambda_lo) == 0.0);
  WickPoly plain(modes, nullptr);
  plain.add({Mode{1}, Mode{-1}}, 1.0);
  CHECK(convolution_check(plain, hi, lambda_lo) <= 1e-12);
  RandomStream rng(9);
  for (int trial = 0; trial < 20; ++trial) CHECK(convolution_check(random_poly(rng, 4, 12), hi, lambda_lo) <= 1e-10);
}

TEST_CASE_FIXTURE(Window, "integrate_out_pointwise: zero, constants, shift") {
  McConfig cfg;
  cfg.inner_samples = 2000;
  cfg.jackknife_blocks = 10;
  RandomStream rng(11);
  const auto psi = sample_field(*lo, rng);
  WickPoly zero(modes, hi);
  zero.set_real_flag(true);
  const auto z = integrate_out_pointwise(zero, psi, lambda_lo, cfg);
  CHECK(z.value == 0.0);
  CHECK(z.std_error == 0.0);
  const auto c = integrate_out_pointwise(WickPoly::constant(modes, hi, 1.75), psi, lambda_lo, cfg);
  CHECK(c.value == 1.75);

  auto S = compile_local(phi4_lagrangian(1, 0.1, 1.0), hi);
  auto S_shift = S;
  S_shift.add(Key{}, 3.0);
  const auto a = integrate_out_pointwise(S, psi, lambda_lo, cfg, 4);
  const auto b = integrate_out_pointwise(S_shift, psi, lambda_lo, cfg, 4);
  CHECK(std::abs(b.value - a.value - 3.0) < 1e-12);
  CHECK(std::abs(b.std_error - a.std_error) < 1e-12);

  CHECK_THROWS_AS(integrate_out_pointwise(S, psi, lambda, cfg), Error);
  McConfig bad = cfg;
  bad.jackknife_blocks = 7;
  CHECK_THROWS_AS(integrate_out_pointwise(S, psi, lambda_lo, bad), Error);
}

TEST_CASE_FIXTURE(Window, "integrate_out_pointwise overflow guard") {
  McConfig cfg;
  cfg.inner_samples = 100;
  RandomStream rng(12);
  const auto psi = sample_field(*lo, rng);
  try {
    integrate_out_pointwise(WickPoly::constant(modes, hi, -800.0), psi, lambda_lo, cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unbounded_below);
  }
}

TEST_CASE_FIXTURE(Window, "integrate_out_pointwise matches the one-mode Gaussian integral") {
  const double g1 = 0.8, g2 = 0.5;
  WickPoly S(modes, hi);
  S.add({Mode{1}, Mode{-1}}, g1);
  S.add({Mode{2}, Mode{-2}}, g2);
  S.set_real_flag(true);
  McConfig cfg;
  cfg.inner_samples = 20000;
  RandomStream rng(13);
  for (int trial = 0; trial < 8; ++trial) {
    const auto psi = sample_field(*lo, rng);
    const auto est = integrate_out_pointwise(S, psi, lambda_lo, cfg, static_cast<std::uint64_t>(trial));
    const double expect =
        oracle::gaussian_integrate_out(g1, (*hi)[idx(1)], w[idx(1)], std::norm(psi.at(Mode{1}))) +
        oracle::gaussian_integrate_out(g2, (*hi)[idx(2)], w[idx(2)], std::norm(psi.at(Mode{2})));
    CHECK(std::abs(est.value - expect) < 5 * est.std_error);
    CHECK(est.std_error > 0.0);
  }
}

TEST_CASE_FIXTURE(Window, "integrate_out of a tiny quadratic reproduces the linear map") {
  const double g = 1e-3;
  WickPoly S(modes, hi);
  S.add({Mode{1}, Mode{-1}}, g);
  S.set_real_flag(true);
  McConfig cfg;
  cfg.outer_samples = 2000;
  cfg.inner_samples = 100;
  cfg.degree_cap = 2;
  cfg.subtract_linear = false;
  const auto r = integrate_out(S, lambda_lo, cfg);
  const Key k = r.poly.key_of({Mode{1}, Mode{-1}});
  CHECK(std::abs(r.poly.coeff(k) - g) < 5 * r.std_error.at(k));
  for (const auto& [key, se] : r.std_error) {
    if (key == k || key.empty()) continue;
    CHECK(std::abs(r.poly.coeff(key)) < 5 * se);
  }
  CHECK(same_ordering(r.poly.ordering(), lo));
}

TEST_CASE_FIXTURE(Window, "integrate_out: zero action and quasilocal quartic") {
  McConfig cfg;
  cfg.outer_samples = 2000;
  cfg.inner_samples = 200;
  cfg.degree_cap = 4;
  WickPoly zero(modes, hi);
  zero.set_real_flag(true);
  CHECK(integrate_out(zero, lambda_lo, cfg).poly.empty());

  const auto S = compile_local(phi4_lagrangian(1, 0.1, 1.0), hi);
  const auto r = integrate_out(S, lambda_lo, cfg, 2);
  CHECK_FALSE(r.useless);
  CHECK(r.poly.check_reality(1e-12));
  for (const auto& [key, se] : r.std_error) {
    if (is_on_shell(key, *modes)) continue;
    CHECK(std::abs(r.poly.coeff(key)) < 3 * se);
  }
  // worker count does not change the result
  const auto r1 = integrate_out(S, lambda_lo, cfg, 1);
  CHECK(r1.poly.terms() == r.poly.terms());
}

TEST_CASE_FIXTURE(Window, "integrate_out approaches u_apply as the coupling vanishes") {
  McConfig cfg;
  cfg.outer_samples = 2000;
  cfg.inner_samples = 200;
  cfg.degree_cap = 4;
  const Key k = WickPoly(modes, hi).key_of({Mode{0}, Mode{0}, Mode{0}, Mode{0}});
  double prev = 0.0;
  for (double lam : {0.2, 0.1}) {
    const auto S = compile_local(phi4_lagrangian(1, lam, 0.0), hi);
    const auto r = integrate_out(S, lambda_lo, cfg);
    const double dev = std::abs(r.poly.coeff(k) - u_apply(S, lambda_lo).coeff(k));
    // second order: the relative deviation halves with the coupling
    const double rel = dev / lam;
    if (prev > 0.0) CHECK(rel < prev);
    prev = rel;
  }
}

TEST_CASE_FIXTURE(Window, "jensen_check") {
  McConfig cfg;
  cfg.inner_samples = 500;
  cfg.jackknife_blocks = 10;
  WickPoly zero(modes, hi);
  zero.set_real_flag(true);
  const auto z = jensen_check(zero, 5, lambda_lo, cfg);
  for (const auto& e : z.entries) {
    CHECK(e.value == 0.0);
    CHECK(e.linear == 0.0);
  }
  const auto c = jensen_check(WickPoly::constant(modes, hi, -2.0), 5, lambda_lo, cfg);
  for (const auto& e : c.entries) {
    CHECK(e.value == -2.0);
    CHECK(e.linear == -2.0);
  }
  const auto S = compile_local(phi4_lagrangian(1, 0.1, 1.0), hi);
  const auto r = jensen_check(S, 20, lambda_lo, cfg);
  CHECK(r.violations == 0);
  for (const auto& e : r.entries) CHECK(e.value <= e.linear + 3 * e.std_error);
}

TEST_CASE_FIXTURE(Window, "lower bounds are preserved by integrate-out") {
  const auto S = compile_local(phi4_lagrangian(1, 0.1, 1.0), hi);
  RandomStream rng(14);
  const double b = lower_bound_estimate(S, 5000, rng).value;
  McConfig cfg;
  cfg.inner_samples = 500;
  const auto r = jensen_check(S, 20, lambda_lo, cfg);
  for (const auto& e : r.entries) CHECK(e.value >= b - 3 * e.std_error);
}
