#pragma once

// Diagonal cutoff propagators c_n(L) = alpha(n^2/L) / (2 (n^2 + 1)), the
// window covariance c_n(L_hi) - c_n(L_lo) of the modes integrated out between
// two scales, the flow parametrization L'(t) = e^{-t} L, and seeded Gaussian
// sampling of real fields. Pairing convention: E[a_n a_m] = delta_{n,-m} c_n.

#include "qlrg/modes.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace qlrg {

// The cutoff alpha is parametrized by s = x^2 (so alpha(x) = f(x^2) is even
// by construction). The exponential profile is f(s) = e^{-s}; a table profile
// interpolates f linearly in s, which keeps alpha differentiable at 0.
class CutoffProfile {
public:
  enum class Kind { exponential, table };

  static CutoffProfile exponential();
  // Points (s_i, f_i) with s_0 = 0, f_0 = 1, s increasing, f nonincreasing
  // and nonnegative. Beyond the last point f is held constant.
  static CutoffProfile table(std::vector<std::pair<double, double>> points);

  Kind kind() const { return kind_; }
  const std::vector<std::pair<double, double>>& points() const { return points_; }

  double value(double s) const;
  double slope(double s) const;

  bool operator==(const CutoffProfile& other) const {
    return kind_ == other.kind_ && points_ == other.points_;
  }

private:
  void validate() const;

  Kind kind_ = Kind::exponential;
  std::vector<std::pair<double, double>> points_;
};

class Covariance {
public:
  Covariance(ModeSetPtr modes, double lambda, CutoffProfile profile = CutoffProfile::exponential());

  const ModeSetPtr& modes() const { return modes_; }
  double lambda() const { return lambda_; }
  const CutoffProfile& profile() const { return profile_; }
  double operator[](std::size_t ordinal) const { return diag_[ordinal]; }
  std::span<const double> diagonal() const { return diag_; }

  // Same window, scale and profile.
  bool same_as(const Covariance& other) const;

  Covariance at_lambda(double lambda) const { return Covariance(modes_, lambda, profile_); }
  // Same scale and profile on a sub-window.
  Covariance restricted(ModeSetPtr sub) const;

private:
  ModeSetPtr modes_;
  double lambda_;
  CutoffProfile profile_;
  std::vector<double> diag_;
};

using CovariancePtr = std::shared_ptr<const Covariance>;

inline CovariancePtr make_covariance(ModeSetPtr modes, double lambda,
                                     CutoffProfile profile = CutoffProfile::exponential()) {
  return std::make_shared<const Covariance>(std::move(modes), lambda, std::move(profile));
}

// Covariance of the modes integrated out between hi and lo (hi > lo). The
// diagonal is formed from the very same profile evaluations as the two
// endpoint covariances.
class WindowCovariance {
public:
  WindowCovariance(const Covariance& hi, const Covariance& lo);
  WindowCovariance(ModeSetPtr modes, double lambda_hi, double lambda_lo,
                   CutoffProfile profile = CutoffProfile::exponential());

  const ModeSetPtr& modes() const { return modes_; }
  double lambda_hi() const { return lambda_hi_; }
  double lambda_lo() const { return lambda_lo_; }
  double operator[](std::size_t ordinal) const { return diag_[ordinal]; }
  std::span<const double> diagonal() const { return diag_; }

private:
  ModeSetPtr modes_;
  double lambda_hi_;
  double lambda_lo_;
  std::vector<double> diag_;
};

double covariance_at(double lambda, const Mode& n,
                     const CutoffProfile& profile = CutoffProfile::exponential());

inline double flow_scale(double lambda, double t) { return std::exp(-t) * lambda; }

// d/dt of the window diagonal c_n(L) - c_n(L'(t)) with L'(t) = e^{-t} L.
double kdot_at(double t, double lambda, const Mode& n,
               const CutoffProfile& profile = CutoffProfile::exponential());

// Seeded normal stream. Streams are addressed by (seed, stream id) so that
// parallel workers draw reproducible, independent sequences.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// a_0 ~ N(0, v_0); Re a_n, Im a_n ~ N(0, v_n / 2) for each representative.
FieldSample sample_gaussian(const ModeSetPtr& modes, std::span<const double> variances,
                            RandomStream& rng);
// Writes a full coefficient vector (indexed by ordinal) without allocating.
void sample_gaussian_into(const ModeSet& modes, std::span<const double> variances,
                          RandomStream& rng, std::span<cplx> out);

inline FieldSample sample_field(const Covariance& cov, RandomStream& rng) {
  return sample_gaussian(cov.modes(), cov.diagonal(), rng);
}
inline FieldSample sample_field(const WindowCovariance& cov, RandomStream& rng) {
  return sample_gaussian(cov.modes(), cov.diagonal(), rng);
}

} // namespace qlrg
