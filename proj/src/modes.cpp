#include "qlrg/modes.hpp"

#include "qlrg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace qlrg {

Mode Mode::operator-() const {
  std::vector<int> out(c_.size());
  std::transform(c_.begin(), c_.end(), out.begin(), [](int v) { return -v; });
  return Mode(std::move(out));
}

Mode Mode::operator+(const Mode& other) const {
  require(other.dim() == dim(), "mode dimension mismatch");
  std::vector<int> out(c_.size());
  for (std::size_t i = 0; i < c_.size(); ++i) out[i] = c_[i] + other.c_[i];
  return Mode(std::move(out));
}

long Mode::norm2() const {
  long s = 0;
  for (int v : c_) s += static_cast<long>(v) * v;
  return s;
}

double Mode::norm() const { return std::sqrt(static_cast<double>(norm2())); }

bool Mode::is_zero() const {
  return std::all_of(c_.begin(), c_.end(), [](int v) { return v == 0; });
}

ModeSet::ModeSet(int dim, std::vector<Mode> members) : dim_(dim), members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  require(!members_.empty(), "mode set must not be empty");
  for (std::size_t i = 0; i < members_.size(); ++i) {
    require(members_[i].dim() == dim_, "mode has wrong dimension");
    index_.emplace(members_[i], i);
    for (int v : members_[i].components()) nmax_ = std::max(nmax_, std::abs(v));
  }
  neg_.resize(members_.size());
  rep_slot_.assign(members_.size(), -1);
  bool has_zero = false;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    auto it = index_.find(-members_[i]);
    require(it != index_.end(), "mode set is not symmetric under n -> -n");
    neg_[i] = it->second;
    if (members_[i].is_zero()) {
      zero_ = i;
      has_zero = true;
    } else if (-members_[i] < members_[i]) {
      rep_slot_[i] = static_cast<int>(reps_.size());
      reps_.push_back(i);
    }
  }
  require(has_zero, "mode set must contain the zero mode");
}

ModeSet ModeSet::box(int dim, int nmax) {
  require(dim >= 1, "dim must be >= 1");
  require(nmax >= 0, "nmax must be >= 0");
  std::vector<Mode> members;
  std::vector<int> c(static_cast<std::size_t>(dim), -nmax);
  while (true) {
    members.emplace_back(c);
    int axis = dim - 1;
    while (axis >= 0 && c[static_cast<std::size_t>(axis)] == nmax) {
      c[static_cast<std::size_t>(axis)] = -nmax;
      --axis;
    }
    if (axis < 0) break;
    ++c[static_cast<std::size_t>(axis)];
  }
  ModeSet out(dim, std::move(members));
  out.nmax_ = nmax;
  return out;
}

ModeSet ModeSet::from_members(int dim, std::vector<Mode> members) {
  require(dim >= 1, "dim must be >= 1");
  return ModeSet(dim, std::move(members));
}

std::optional<std::size_t> ModeSet::find(const Mode& n) const {
  auto it = index_.find(n);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ModeSet::index_of(const Mode& n) const {
  auto i = find(n);
  require(i.has_value(), "mode is not in the window");
  return *i;
}

bool ModeSet::contains(const ModeSet& other) const {
  if (other.dim_ != dim_) return false;
  return std::all_of(other.members_.begin(), other.members_.end(),
                     [&](const Mode& m) { return index_.count(m) > 0; });
}

ModeSetPtr build_mode_set(int dim, int nmax) {
  return std::make_shared<const ModeSet>(ModeSet::box(dim, nmax));
}

FieldSample::FieldSample(ModeSetPtr modes, double zero_mode, std::vector<cplx> representative_values)
    : modes_(std::move(modes)), zero_(zero_mode), reps_(std::move(representative_values)) {
  require(modes_ != nullptr, "field sample needs a mode set");
  require(reps_.size() == modes_->representatives().size(),
          "wrong number of representative coefficients");
}

FieldSample FieldSample::zero(ModeSetPtr modes) {
  const std::size_t n = modes->representatives().size();
  return FieldSample(std::move(modes), 0.0, std::vector<cplx>(n));
}

FieldSample FieldSample::from_full(ModeSetPtr modes, std::span<const cplx> values, double tol) {
  require(values.size() == modes->size(), "coefficient vector has wrong length");
  const auto& m = *modes;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (std::abs(values[i] - std::conj(values[m.negated(i)])) > tol)
      fail(ErrorCode::invalid_argument, "coefficients violate a_{-n} = conj(a_n)");
  }
  std::vector<cplx> reps;
  reps.reserve(m.representatives().size());
  for (std::size_t r : m.representatives()) reps.push_back(values[r]);
  return FieldSample(modes, values[m.zero_index()].real(), std::move(reps));
}

FieldSample FieldSample::with(const Mode& n, cplx value) const {
  FieldSample out = *this;
  const std::size_t i = modes_->index_of(n);
  if (i == modes_->zero_index()) {
    require(value.imag() == 0.0, "a_0 must be real");
    out.zero_ = value.real();
    return out;
  }
  int slot = modes_->representative_slot(i);
  if (slot >= 0) {
    out.reps_[static_cast<std::size_t>(slot)] = value;
  } else {
    slot = modes_->representative_slot(modes_->negated(i));
    out.reps_[static_cast<std::size_t>(slot)] = std::conj(value);
  }
  return out;
}

cplx FieldSample::operator[](std::size_t ordinal) const {
  if (ordinal == modes_->zero_index()) return {zero_, 0.0};
  int slot = modes_->representative_slot(ordinal);
  if (slot >= 0) return reps_[static_cast<std::size_t>(slot)];
  slot = modes_->representative_slot(modes_->negated(ordinal));
  return std::conj(reps_[static_cast<std::size_t>(slot)]);
}

void FieldSample::fill(std::span<cplx> out) const {
  const auto& m = *modes_;
  out[m.zero_index()] = {zero_, 0.0};
  for (std::size_t s = 0; s < reps_.size(); ++s) {
    const std::size_t r = m.representatives()[s];
    out[r] = reps_[s];
    out[m.negated(r)] = std::conj(reps_[s]);
  }
}

std::vector<cplx> FieldSample::full() const {
  std::vector<cplx> out(modes_->size());
  fill(out);
  return out;
}

FieldSample FieldSample::operator+(const FieldSample& other) const {
  require(*modes_ == *other.modes_, "field samples live on different windows");
  FieldSample out = *this;
  out.zero_ += other.zero_;
  for (std::size_t s = 0; s < reps_.size(); ++s) out.reps_[s] += other.reps_[s];
  return out;
}

FieldSample FieldSample::scaled(double factor) const {
  FieldSample out = *this;
  out.zero_ *= factor;
  for (auto& v : out.reps_) v *= factor;
  return out;
}

double triple_norm(const FieldSample& f) {
  const auto& m = *f.modes();
  double s = f.zero_mode() * f.zero_mode();
  for (std::size_t slot = 0; slot < m.representatives().size(); ++slot) {
    const Mode& n = m[m.representatives()[slot]];
    s += 2.0 * std::exp(n.norm()) * std::norm(f.representative_values()[slot]);
  }
  return s;
}

cplx eval_derivative_complex(const FieldSample& f, std::span<const int> axes,
                             std::span<const double> x) {
  const auto& m = *f.modes();
  require(static_cast<int>(x.size()) == m.dim(), "point has wrong dimension");
  for (int a : axes) require(a >= 0 && a < m.dim(), "derivative axis out of range");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  cplx total{0.0, 0.0};
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Mode& n = m[i];
    cplx factor{1.0, 0.0};
    for (int a : axes) factor *= cplx(0.0, two_pi * n[a]);
    double phase = 0.0;
    for (int k = 0; k < m.dim(); ++k) phase += n[k] * x[static_cast<std::size_t>(k)];
    total += factor * f[i] * std::polar(1.0, two_pi * phase);
  }
  return total;
}

double eval_derivative(const FieldSample& f, std::span<const int> axes, std::span<const double> x) {
  return eval_derivative_complex(f, axes, x).real();
}

double derivative_bound_constant(const ModeSet& modes, int order) {
  require(order >= 0, "derivative order must be >= 0");
  double s = 0.0;
  for (const Mode& n : modes.members()) {
    const double k = 2.0 * std::numbers::pi * n.norm();
    s += std::pow(k, 2 * order) * std::exp(-n.norm());
  }
  return std::sqrt(s);
}

} // namespace qlrg
