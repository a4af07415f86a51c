#pragma once

// Effective actions from local Lagrangians, the quasilocality test, cylindrical
// projection, and bounded trigonometric approximants of one-variable
// integrands.

#include "qlrg/covariance.hpp"
#include "qlrg/modes.hpp"
#include "qlrg/wick.hpp"

#include "json.hpp"

#include <cstdint>
#include <vector>

namespace qlrg {

// One factor (d^alpha phi)^power; `axes` lists the 0-based derivative axes.
struct LagrangianFactor {
  std::vector<int> axes;
  int power = 1;
};

struct LagrangianTerm {
  double coefficient = 0.0;
  std::vector<LagrangianFactor> factors;
};

// L = sum_terms coefficient * prod_factors (d^alpha phi)^power, integrated
// over the unit torus.
//
// JSON form:
//   { "dim": 1, "max_derivative_order": 1,
//     "terms": [ [coef, [[axes...], power], [[axes...], power], ...], ... ] }
struct LagrangianSpec {
  int dim = 1;
  int max_derivative_order = 0;
  std::vector<LagrangianTerm> terms;

  int degree() const;
  void validate() const;
};

LagrangianSpec lagrangian_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LagrangianSpec& spec);

// lambda phi^4 + (m2 / 2) phi^2
LagrangianSpec phi4_lagrangian(int dim, double lambda, double m2);

// Integrates the Lagrangian over the torus mode by mode (the exact Kronecker
// condition sum n_i = 0 inside the window) and Wick-orders the result.
WickPoly compile_local(const LagrangianSpec& spec, const CovariancePtr& ordering,
                       int degree_cap = kNoDegreeCap);

struct QuasilocalityReport {
  bool quasilocal = true;
  // sum over off-shell keys of |G|^2 <:K:, :K:>
  double off_shell_mass = 0.0;
};

QuasilocalityReport is_quasilocal(const WickPoly& p, double tol = 0.0);

// Conditional expectation onto the modes of sub: terms with any factor
// outside sub vanish. The result is ordered by the restricted covariance.
WickPoly cylindrical_project(const WickPoly& p, const ModeSetPtr& sub);

// T(z) = sum_{|k| < N} (1 - |k|/N) c_k e^{i pi k z / L}, real on real z.
class TrigPolynomial {
public:
  TrigPolynomial(double half_period, std::vector<cplx> coefficients);

  double half_period() const { return half_period_; }
  int order() const { return static_cast<int>(coeffs_.size()); }
  // Fejer-weighted coefficients for k = 0..N-1 (k < 0 by conjugation).
  const std::vector<cplx>& coefficients() const { return coeffs_; }
  double operator()(double z) const;

private:
  double half_period_;
  std::vector<cplx> coeffs_;
};

struct FejerReport {
  double half_period = 0.0;       // L = beta (R + 1)
  double sup_error = 0.0;         // sup |T - P| on [-beta R, beta R]
  double min_value = 0.0;         // min T over a dense grid of the period
  double max_value = 0.0;
  double bound = 0.0;             // max P on [-L, L]; T never exceeds it
  bool nonnegative = false;       // min_value >= -1e-12
};

struct FejerResult {
  TrigPolynomial approximant;
  FejerReport report;
};

// P is given by ascending power coefficients. beta_r is the product beta R
// of the inner radius; beta the overhang factor, so L = beta_r + beta.
FejerResult fejer_approximant(const std::vector<double>& poly, double beta_r, int order,
                              double beta = 1.0, int grid_points = 4001);

double eval_polynomial(const std::vector<double>& poly, double z);

struct FunctionalError {
  double l2 = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

// Empirical L^2(mu) distance between int T(phi(x)) dx and int P(phi(x)) dx
// (d = 1), with the x integral done on an equispaced grid of quad_points.
FunctionalError fejer_functional_l2(const std::vector<double>& poly, const TrigPolynomial& t,
                                    const Covariance& cov, int samples, std::uint64_t seed,
                                    int quad_points = 64);

struct LowerBoundEstimate {
  double value = 0.0;
  int samples = 0;
  bool empirical_only = true;
};

// Minimum of p over draws from its ordering measure.
LowerBoundEstimate lower_bound_estimate(const WickPoly& p, int samples, RandomStream& rng);

} // namespace qlrg
