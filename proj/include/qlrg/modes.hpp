#pragma once

// Momentum lattice Z^d, symmetric truncation windows and real field samples
// on the unit-volume torus.

#include <complex>
#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace qlrg {

using cplx = std::complex<double>;

class Mode {
public:
  Mode() = default;
  explicit Mode(std::vector<int> components) : c_(std::move(components)) {}
  Mode(std::initializer_list<int> components) : c_(components) {}

  int dim() const { return static_cast<int>(c_.size()); }
  int operator[](int axis) const { return c_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& components() const { return c_; }

  Mode operator-() const;
  Mode operator+(const Mode& other) const;
  long norm2() const;
  double norm() const;
  bool is_zero() const;

  auto operator<=>(const Mode&) const = default;
  bool operator==(const Mode&) const = default;

private:
  std::vector<int> c_;
};

// A finite window F of Z^d with n in F <=> -n in F and 0 in F. Members are
// kept in lexicographic order; the position of a member in that order is its
// ordinal, which is what every other module uses to address modes.
class ModeSet {
public:
  static ModeSet box(int dim, int nmax);
  static ModeSet from_members(int dim, std::vector<Mode> members);

  int dim() const { return dim_; }
  std::size_t size() const { return members_.size(); }
  const Mode& operator[](std::size_t ordinal) const { return members_[ordinal]; }
  const std::vector<Mode>& members() const { return members_; }

  std::optional<std::size_t> find(const Mode& n) const;
  std::size_t index_of(const Mode& n) const;
  std::size_t negated(std::size_t ordinal) const { return neg_[ordinal]; }
  std::size_t zero_index() const { return zero_; }
  // One member of each {n, -n} pair with n != 0 (the lexicographically
  // larger one).
  const std::vector<std::size_t>& representatives() const { return reps_; }
  // Position of a representative ordinal inside representatives(), or -1.
  int representative_slot(std::size_t ordinal) const { return rep_slot_[ordinal]; }

  // Box half-width when built by box(), otherwise the max |n_i| over members.
  int nmax() const { return nmax_; }

  bool contains(const ModeSet& other) const;
  bool operator==(const ModeSet& other) const {
    return dim_ == other.dim_ && members_ == other.members_;
  }

private:
  ModeSet(int dim, std::vector<Mode> members);

  int dim_ = 0;
  int nmax_ = 0;
  std::vector<Mode> members_;
  std::map<Mode, std::size_t> index_;
  std::vector<std::size_t> neg_;
  std::vector<std::size_t> reps_;
  std::vector<int> rep_slot_;
  std::size_t zero_ = 0;
};

using ModeSetPtr = std::shared_ptr<const ModeSet>;

ModeSetPtr build_mode_set(int dim, int nmax);

// One realization {a_n} of a real field. Only a_0 (real) and one complex
// value per {n, -n} pair are stored, so a_{-n} = conj(a_n) holds by
// construction.
class FieldSample {
public:
  FieldSample(ModeSetPtr modes, double zero_mode, std::vector<cplx> representative_values);
  static FieldSample zero(ModeSetPtr modes);
  // Builds from a full coefficient vector (indexed by ordinal); entries must
  // already satisfy the reality constraint to within tol.
  static FieldSample from_full(ModeSetPtr modes, std::span<const cplx> values, double tol = 1e-12);

  // Sets a_n (and therefore a_{-n}); a_0 must be real.
  FieldSample with(const Mode& n, cplx value) const;

  cplx operator[](std::size_t ordinal) const;
  cplx at(const Mode& n) const { return (*this)[modes_->index_of(n)]; }
  std::vector<cplx> full() const;
  void fill(std::span<cplx> out) const;

  const ModeSetPtr& modes() const { return modes_; }
  double zero_mode() const { return zero_; }
  const std::vector<cplx>& representative_values() const { return reps_; }

  FieldSample operator+(const FieldSample& other) const;
  FieldSample scaled(double factor) const;

private:
  ModeSetPtr modes_;
  double zero_ = 0.0;
  std::vector<cplx> reps_;
};

// sum_n e^{|n|} |a_n|^2
double triple_norm(const FieldSample& f);

// d^m phi / dx_{i_1} ... dx_{i_m} at x in [0,1)^d; `axes` lists i_1..i_m
// (0-based, empty for phi itself).
cplx eval_derivative_complex(const FieldSample& f, std::span<const int> axes,
                             std::span<const double> x);
double eval_derivative(const FieldSample& f, std::span<const int> axes,
                       std::span<const double> x);

// C_m = sqrt(sum_n (2 pi |n|)^{2m} e^{-|n|}) over the window. By
// Cauchy-Schwarz every m-th derivative satisfies |d^m phi(x)| <= C_m *
// sqrt(triple_norm(f)).
double derivative_bound_constant(const ModeSet& modes, int order);

} // namespace qlrg
