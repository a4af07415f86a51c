#include "qlrg/rg_linear.hpp"

#include "qlrg/error.hpp"

#include <cmath>

namespace qlrg {

WickPoly u_apply(const WickPoly& p, double lambda_lo) {
  require(!p.is_plain(), "u_apply needs a Wick-ordered polynomial");
  const auto& cov = *p.ordering();
  require(lambda_lo > 0.0, "target scale must be positive");
  require(lambda_lo < cov.lambda(), "u_apply requires a lower target scale");
  return p.retagged(std::make_shared<const Covariance>(cov.at_lambda(lambda_lo)));
}

WickPoly ou_apply(const WickPoly& p, double tau) {
  require(tau >= 0.0 && std::isfinite(tau), "tau must be nonnegative");
  WickPoly out(p.modes(), p.ordering(), p.degree_cap());
  for (const auto& [k, v] : p.terms()) out.add(k, v * std::exp(-static_cast<double>(k.size()) * tau));
  out.set_real_flag(p.real_flag());
  return out;
}

double convolution_check(const WickPoly& p, const CovariancePtr& mu, double lambda_lo) {
  require(mu != nullptr, "convolution check needs the measure mu_L");
  const WickPoly q = reorder(p, mu);
  const WickPoly u = u_apply(q, lambda_lo);
  const cplx lhs = expectation(wick_to_plain(q), *mu);
  const cplx rhs = expectation(wick_to_plain(u), *u.ordering());
  return std::abs(lhs - rhs);
}

} // namespace qlrg
