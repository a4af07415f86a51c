#pragma once

// The linearized integration-out map: Gaussian convolution by the window
// measure, which takes :K:_L to :K:_L' with the same coefficient, and the
// Ornstein-Uhlenbeck semigroup, diagonal with eigenvalue e^{-k tau} on
// degree-k Wick monomials.

#include "qlrg/covariance.hpp"
#include "qlrg/wick.hpp"

namespace qlrg {

// p must be Wick-ordered w.r.t. mu_L; returns the same table ordered by
// mu_{lambda_lo}. Requires lambda_lo < L.
WickPoly u_apply(const WickPoly& p, double lambda_lo);

WickPoly ou_apply(const WickPoly& p, double tau);

// |E_{mu_L}[p] - E_{mu_L'}[u_apply(p, L')]|, both sides from the plain
// expansion and full pairing sums under the respective covariances. A plain
// p is first Wick-ordered by mu.
double convolution_check(const WickPoly& p, const CovariancePtr& mu, double lambda_lo);

} // namespace qlrg
