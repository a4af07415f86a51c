#include "doctest.h"

#include "qlrg/covariance.hpp"
#include "qlrg/error.hpp"
#include "qlrg/modes.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace qlrg;

TEST_CASE("build_mode_set box sizes") {
  auto f0 = build_mode_set(1, 0);
  CHECK(f0->size() == 1);
  CHECK((*f0)[0] == Mode{0});

  auto f1 = build_mode_set(1, 2);
  CHECK(f1->size() == 5);
  CHECK(f1->members() == std::vector<Mode>{{-2}, {-1}, {0}, {1}, {2}});

  auto f2 = build_mode_set(2, 1);
  CHECK(f2->size() == 9);
  CHECK(f2->find(Mode{1, -1}).has_value());

  CHECK_THROWS_AS(build_mode_set(0, 1), Error);
  CHECK_THROWS_AS(build_mode_set(1, -1), Error);
}

TEST_CASE("mode sets are symmetric with a zero mode") {
  auto f = build_mode_set(2, 2);
  for (std::size_t i = 0; i < f->size(); ++i) CHECK((*f)[f->negated(i)] == -(*f)[i]);
  CHECK((*f)[f->zero_index()].is_zero());
  CHECK(f->representatives().size() * 2 + 1 == f->size());

  CHECK_THROWS_AS(ModeSet::from_members(1, {{0}, {1}}), Error);
  CHECK_THROWS_AS(ModeSet::from_members(1, {{-1}, {1}}), Error);
  auto sub = ModeSet::from_members(1, {{-1}, {0}, {1}});
  CHECK(f->contains(ModeSet::box(2, 1)));
  CHECK(build_mode_set(1, 2)->contains(sub));
}

TEST_CASE("field samples respect the reality constraint by construction") {
  auto f = build_mode_set(1, 2);
  auto s = FieldSample::zero(f).with(Mode{-1}, cplx(0.3, 0.4));
  CHECK(s.at(Mode{1}) == cplx(0.3, -0.4));
  CHECK(s.at(Mode{-1}) == cplx(0.3, 0.4));
  CHECK_THROWS_AS(s.with(Mode{0}, cplx(1.0, 0.5)), Error);

  std::vector<cplx> bad{{0, 0}, {1, 0}, {0, 0}, {2, 0}, {0, 0}};
  CHECK_THROWS_AS(FieldSample::from_full(f, bad), Error);
}

TEST_CASE("triple_norm") {
  auto f = build_mode_set(1, 2);
  CHECK(triple_norm(FieldSample::zero(f)) == 0.0);
  CHECK(triple_norm(FieldSample::zero(f).with(Mode{0}, 2.0)) == doctest::Approx(4.0));
  // a_1 = a_{-1} = 1: e^1 + e^1
  CHECK(triple_norm(FieldSample::zero(f).with(Mode{1}, 1.0)) == doctest::Approx(2.0 * std::numbers::e));
}

TEST_CASE("eval_derivative") {
  auto f = build_mode_set(1, 2);
  const std::vector<double> x0{0.0};
  const std::vector<int> none, dx{0};
  CHECK(eval_derivative(FieldSample::zero(f), dx, x0) == 0.0);
  auto cosine = FieldSample::zero(f).with(Mode{1}, 0.5);
  CHECK(eval_derivative(cosine, none, x0) == doctest::Approx(1.0));
  CHECK(eval_derivative(cosine, dx, x0) == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<double> xq{0.25};
  CHECK(eval_derivative(cosine, dx, xq) == doctest::Approx(-2.0 * std::numbers::pi));
}

TEST_CASE("derivatives of real fields are real and bounded by the weighted norm") {
  auto f = build_mode_set(2, 2);
  Covariance cov(f, 3.0);
  RandomStream rng(7);
  const std::vector<std::vector<int>> derivs{{}, {0}, {1}, {0, 1}, {1, 1, 0}};
  for (int trial = 0; trial < 50; ++trial) {
    auto s = sample_field(cov, rng).scaled(trial % 2 ? 5.0 : 0.01);
    const double tn = triple_norm(s);
    for (const auto& d : derivs) {
      const std::vector<double> x{rng.uniform(), rng.uniform()};
      const cplx v = eval_derivative_complex(s, d, x);
      CHECK(std::abs(v.imag()) < 1e-12);
      const double bound = derivative_bound_constant(*f, static_cast<int>(d.size())) * std::sqrt(tn);
      CHECK(std::abs(v.real()) <= bound * (1 + 1e-12));
    }
  }
}

TEST_CASE("Parseval at truncation") {
  auto f = build_mode_set(1, 3);
  Covariance cov(f, 5.0);
  RandomStream rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = sample_field(cov, rng);
    // phi^2 is a trig polynomial of degree 6: an equispaced rule with 16
    // points is exact.
    const int m = 16;
    double quad = 0.0;
    for (int j = 0; j < m; ++j) {
      const std::vector<double> x{static_cast<double>(j) / m};
      const double v = eval_derivative(s, {}, x);
      quad += v * v / m;
    }
    double parseval = 0.0;
    for (const cplx& a : s.full()) parseval += std::norm(a);
    CHECK(quad == doctest::Approx(parseval).epsilon(1e-12));
  }
}
