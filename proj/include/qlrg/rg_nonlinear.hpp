#pragma once

// The integration-out map I(S)[psi] = -ln int e^{-S[phi + psi]} dmu_{L,L'}[phi]
// by Monte Carlo, its projection back onto the Wick basis of mu_L', and the
// Jensen bound I <= I' = u_apply(S).

#include "qlrg/covariance.hpp"
#include "qlrg/modes.hpp"
#include "qlrg/wick.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace qlrg {

struct McConfig {
  int outer_samples = 10000;  // psi draws
  int inner_samples = 1000;   // phi draws per psi
  std::uint64_t seed = 1;
  int degree_cap = 4;
  int jackknife_blocks = 10;
  // Project I - I' instead of I and add u_apply(S) back exactly. I' is known
  // in closed form, so this only removes its sampling noise.
  bool subtract_linear = true;

  void validate() const;
};

struct PointwiseEstimate {
  double value = 0.0;      // jackknife-corrected
  double plain = 0.0;      // -ln of the sample mean, uncorrected
  double std_error = 0.0;
};

// One psi, phi ~ mu_{L,L'} drawn from RandomStream(cfg.seed, stream).
PointwiseEstimate integrate_out_pointwise(const WickPoly& S, const FieldSample& psi, double lambda_lo,
                                          const McConfig& cfg, std::uint64_t stream = 0);

struct ProjectedAction {
  WickPoly poly;                       // ordered by mu_L'
  std::map<Key, double> std_error;     // per key, complex-modulus standard error
  bool useless = false;                // every on-shell key has std_error > |G|
  double max_pointwise_error = 0.0;    // largest per-psi jackknife error
};

ProjectedAction integrate_out(const WickPoly& S, double lambda_lo, const McConfig& cfg,
                              int workers = 1);

struct JensenEntry {
  double value = 0.0;       // MC I(S)[psi]
  double std_error = 0.0;
  double linear = 0.0;      // I'(S)[psi], exact
  double excess_sigma = 0.0;  // (value - linear) / std_error, 0 when both agree exactly
  bool violation = false;
};

struct JensenReport {
  std::vector<JensenEntry> entries;
  int violations = 0;
  double k_sigma = 3.0;
};

JensenReport jensen_check(const WickPoly& S, int psi_draws, double lambda_lo, const McConfig& cfg,
                          double k_sigma = 3.0, int workers = 1);

// Stream ids: psi_j is drawn from stream 2j, its inner phi draws from 2j + 1.
inline std::uint64_t psi_stream(std::size_t j) { return 2 * static_cast<std::uint64_t>(j); }
inline std::uint64_t inner_stream(std::size_t j) { return 2 * static_cast<std::uint64_t>(j) + 1; }

} // namespace qlrg
