#include "qlrg/covariance.hpp"

#include "qlrg/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qlrg {

CutoffProfile CutoffProfile::exponential() { return CutoffProfile{}; }

CutoffProfile CutoffProfile::table(std::vector<std::pair<double, double>> points) {
  CutoffProfile p;
  p.kind_ = Kind::table;
  p.points_ = std::move(points);
  p.validate();
  return p;
}

void CutoffProfile::validate() const {
  require(points_.size() >= 2, "cutoff table needs at least two points");
  require(points_.front().first == 0.0 && points_.front().second == 1.0,
          "cutoff table must start at (0, 1)");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    require(points_[i].first > points_[i - 1].first, "cutoff table abscissae must increase");
    require(points_[i].second <= points_[i - 1].second, "cutoff profile must be nonincreasing");
    require(points_[i].second >= 0.0, "cutoff profile must be nonnegative");
  }
  // Sampled checks of the properties the propagators rely on.
  for (int k = 0; k <= 400; ++k) {
    const double x = 0.01 * k;
    const double a = value(x * x), b = value((x + 0.01) * (x + 0.01));
    require(b <= a + 1e-15, "cutoff profile is not monotone on x >= 0");
  }
  for (double h : {1e-6, 1e-7}) {
    require(std::abs(value(h * h) - 1.0) / h < 1e-3, "cutoff profile is not differentiable at 0");
  }
}

double CutoffProfile::value(double s) const {
  if (kind_ == Kind::exponential) return std::exp(-s);
  if (s <= 0.0) return 1.0;
  if (s >= points_.back().first) return points_.back().second;
  auto it = std::upper_bound(points_.begin(), points_.end(), s,
                             [](double v, const auto& p) { return v < p.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (s - lo.first) / (hi.first - lo.first);
  return lo.second + w * (hi.second - lo.second);
}

double CutoffProfile::slope(double s) const {
  if (kind_ == Kind::exponential) return -std::exp(-s);
  if (s < 0.0 || s >= points_.back().first) return 0.0;
  auto it = std::upper_bound(points_.begin(), points_.end(), s,
                             [](double v, const auto& p) { return v < p.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  return (hi.second - lo.second) / (hi.first - lo.first);
}

double covariance_at(double lambda, const Mode& n, const CutoffProfile& profile) {
  require(lambda > 0.0, "cutoff scale must be positive");
  const double n2 = static_cast<double>(n.norm2());
  return profile.value(n2 / lambda) / (2.0 * (n2 + 1.0));
}

double kdot_at(double t, double lambda, const Mode& n, const CutoffProfile& profile) {
  require(t >= 0.0, "flow time must be nonnegative");
  require(lambda > 0.0, "cutoff scale must be positive");
  const double n2 = static_cast<double>(n.norm2());
  if (n2 == 0.0) return 0.0;
  // s(t) = n^2 / L'(t) = n^2 e^t / L, ds/dt = s.
  const double s = n2 / flow_scale(lambda, t);
  return -profile.slope(s) * s / (2.0 * (n2 + 1.0));
}

Covariance::Covariance(ModeSetPtr modes, double lambda, CutoffProfile profile)
    : modes_(std::move(modes)), lambda_(lambda), profile_(std::move(profile)) {
  require(modes_ != nullptr, "covariance needs a mode set");
  require(lambda_ > 0.0, "cutoff scale must be positive");
  diag_.reserve(modes_->size());
  for (const Mode& n : modes_->members()) diag_.push_back(covariance_at(lambda_, n, profile_));
}

bool Covariance::same_as(const Covariance& other) const {
  if (this == &other) return true;
  return lambda_ == other.lambda_ && profile_ == other.profile_ &&
         (modes_ == other.modes_ || *modes_ == *other.modes_);
}

Covariance Covariance::restricted(ModeSetPtr sub) const {
  require(modes_->contains(*sub), "sub-window is not contained in the window");
  return Covariance(std::move(sub), lambda_, profile_);
}

WindowCovariance::WindowCovariance(const Covariance& hi, const Covariance& lo)
    : modes_(hi.modes()), lambda_hi_(hi.lambda()), lambda_lo_(lo.lambda()) {
  require(*hi.modes() == *lo.modes(), "window endpoints live on different windows");
  require(hi.profile() == lo.profile(), "window endpoints use different cutoff profiles");
  require(lambda_hi_ > lambda_lo_, "window needs lambda_hi > lambda_lo");
  diag_.resize(modes_->size());
  for (std::size_t i = 0; i < diag_.size(); ++i) diag_[i] = hi[i] - lo[i];
}

WindowCovariance::WindowCovariance(ModeSetPtr modes, double lambda_hi, double lambda_lo,
                                   CutoffProfile profile)
    : WindowCovariance(Covariance(modes, lambda_hi, profile), Covariance(modes, lambda_lo, profile)) {}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer applied to the pair.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream)
    : engine_(mix_seed(seed, stream)) {}

void sample_gaussian_into(const ModeSet& modes, std::span<const double> variances,
                          RandomStream& rng, std::span<cplx> out) {
  out[modes.zero_index()] = {std::sqrt(variances[modes.zero_index()]) * rng.normal(), 0.0};
  for (std::size_t r : modes.representatives()) {
    const double s = std::sqrt(0.5 * variances[r]);
    const double re = s * rng.normal();
    const double im = s * rng.normal();
    out[r] = {re, im};
    out[modes.negated(r)] = {re, -im};
  }
}

FieldSample sample_gaussian(const ModeSetPtr& modes, std::span<const double> variances,
                            RandomStream& rng) {
  require(variances.size() == modes->size(), "variance vector has wrong length");
  const double a0 = std::sqrt(variances[modes->zero_index()]) * rng.normal();
  std::vector<cplx> reps;
  reps.reserve(modes->representatives().size());
  for (std::size_t r : modes->representatives()) {
    const double s = std::sqrt(0.5 * variances[r]);
    const double re = s * rng.normal();
    const double im = s * rng.normal();
    reps.emplace_back(re, im);
  }
  return FieldSample(modes, a0, std::move(reps));
}

} // namespace qlrg
