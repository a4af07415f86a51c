#include "doctest.h"

#include "qlrg/covariance.hpp"
#include "qlrg/error.hpp"

#include <cmath>
#include <limits>

using namespace qlrg;

TEST_CASE("covariance_at") {
  CHECK(covariance_at(0.7, Mode{0}) == 0.5);
  CHECK(covariance_at(123.0, Mode{0, 0}) == 0.5);
  CHECK(covariance_at(1.0, Mode{1}) == doctest::Approx(std::exp(-1.0) / 4.0));
  CHECK(covariance_at(1.0, Mode{1}) == doctest::Approx(0.09197).epsilon(1e-4));
  CHECK(covariance_at(1e9, Mode{1}) == doctest::Approx(0.25).epsilon(1e-8));
  CHECK_THROWS_AS(covariance_at(0.0, Mode{1}), Error);
  CHECK_THROWS_AS(covariance_at(-1.0, Mode{1}), Error);
}

TEST_CASE("kdot_at: zero mode, sign, finite differences, integration") {
  const double lambda = 4.0;
  for (double t : {0.0, 0.3, 1.5}) CHECK(kdot_at(t, lambda, Mode{0}) == 0.0);
  CHECK_THROWS_AS(kdot_at(-0.1, lambda, Mode{1}), Error);

  auto window = [&](double t, const Mode& n) {
    return covariance_at(lambda, n) - covariance_at(flow_scale(lambda, t), n);
  };
  for (const Mode& n : {Mode{1}, Mode{2}, Mode{1, 1}, Mode{3}}) {
    for (double t : {0.0, 0.2, 0.9, 2.0}) CHECK(kdot_at(t, lambda, n) >= 0.0);
    // forward difference at t = 0 (window(0) = 0) and central elsewhere
    const double h = 1e-7;
    CHECK(kdot_at(0.0, lambda, n) == doctest::Approx(window(h, n) / h).epsilon(1e-6));
    const double hc = 1e-5;
    CHECK(kdot_at(0.7, lambda, n) ==
          doctest::Approx((window(0.7 + hc, n) - window(0.7 - hc, n)) / (2 * hc)).epsilon(1e-8));
    // composite Simpson integral of kdot recovers the window
    const double t_end = 1.3;
    const int m = 2000;
    double s = kdot_at(0.0, lambda, n) + kdot_at(t_end, lambda, n);
    for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * kdot_at(t_end * k / m, lambda, n);
    CHECK(std::abs(s * t_end / (3 * m) - window(t_end, n)) < 1e-8);
  }
}

TEST_CASE("window covariance is nonnegative and additive") {
  auto f = build_mode_set(2, 2);
  Covariance hi(f, 6.0), lo(f, 1.5);
  WindowCovariance w(hi, lo);
  for (std::size_t i = 0; i < f->size(); ++i) {
    CHECK(w[i] >= 0.0);
    CHECK(w[i] == w[f->negated(i)]);
    const double eps = std::numeric_limits<double>::epsilon();
    CHECK(std::abs(lo[i] + w[i] - hi[i]) <= 2 * eps * hi[i]);
  }
  CHECK(w[f->zero_index()] == 0.0);
  CHECK_THROWS_AS(WindowCovariance(lo, hi), Error);
}

TEST_CASE("table cutoff profiles are validated") {
  auto p = CutoffProfile::table({{0.0, 1.0}, {1.0, 0.5}, {4.0, 0.0}});
  CHECK(p.value(0.5) == doctest::Approx(0.75));
  CHECK(p.value(10.0) == 0.0);
  auto f = build_mode_set(1, 2);
  Covariance c(f, 2.0, p);
  CHECK(c[f->index_of(Mode{1})] == doctest::Approx(0.75 / 4.0));
  CHECK(kdot_at(0.0, 2.0, Mode{1}, p) == doctest::Approx(0.5 * 0.5 / 4.0));
  CHECK_THROWS_AS(CutoffProfile::table({{0.0, 0.9}, {1.0, 0.5}}), Error);
  CHECK_THROWS_AS(CutoffProfile::table({{0.0, 1.0}, {1.0, 1.5}}), Error);
  CHECK_THROWS_AS(CutoffProfile::table({{0.0, 1.0}, {1.0, -0.1}}), Error);
}

TEST_CASE("sample_field second moments") {
  auto f = build_mode_set(1, 2);
  Covariance cov(f, 10.0);
  RandomStream rng(2024);
  const int n = 100000;
  const std::size_t i1 = f->index_of(Mode{1}), i0 = f->zero_index();
  double m_abs2 = 0, v_abs2 = 0, m_re = 0, v_re = 0, m_0 = 0, v_0 = 0;
  for (int k = 0; k < n; ++k) {
    auto s = sample_field(cov, rng);
    const cplx a1 = s[i1];
    const double a0 = s[i0].real();
    const double x = std::norm(a1), y = (a1 * a1).real(), z = a0 * a0;
    m_abs2 += x; v_abs2 += x * x;
    m_re += y; v_re += y * y;
    m_0 += z; v_0 += z * z;
  }
  auto check = [n](double sum, double sumsq, double expected) {
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean - expected) < 5 * se);
  };
  check(m_abs2, v_abs2, cov[i1]);
  check(m_re, v_re, 0.0);
  check(m_0, v_0, 0.5);
}

TEST_CASE("two independent scale samples add up to the full measure") {
  auto f = build_mode_set(1, 2);
  Covariance hi(f, 8.0), lo(f, 2.0);
  WindowCovariance w(hi, lo);
  const int n = 100000;
  for (const Mode& m : {Mode{1}, Mode{2}}) {
    const std::size_t i = f->index_of(m);
    double s = 0, ss = 0;
    RandomStream a(5, i), b(6, i);
    for (int k = 0; k < n; ++k) {
      const cplx v = sample_field(lo, a)[i] + sample_field(w, b)[i];
      s += std::norm(v);
      ss += std::norm(v) * std::norm(v);
    }
    const double mean = s / n, se = std::sqrt((ss / n - mean * mean) / n);
    CHECK(std::abs(mean - hi[i]) < 5 * se);
  }
}

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(42, 3), b(42, 3), c(42, 4);
  const double x = a.normal();
  CHECK(x == b.normal());
  CHECK(x != c.normal());
}
