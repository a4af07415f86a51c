#pragma once

// Wick-ordered sparse polynomials in the Fourier modes.
//
// A WickPoly is S = sum_K G(K) :a_{n_1} ... a_{n_k}:_C where K = (n_1 <= ... <=
// n_k) is a canonical multiset of mode ordinals and C is the diagonal
// Gaussian covariance the Wick ordering refers to. A null ordering means the
// monomials are plain products a_{n_1} ... a_{n_k}.
//
// Every operation works class-by-class on the mode multiplicities: because
// E[a_n a_m] = delta_{n,-m} c_n, contractions only ever join n with -n, so
// the pairing sums of the Wick calculus factorize over the classes {0} and
// {n, -n}.

#include "qlrg/covariance.hpp"
#include "qlrg/modes.hpp"

#include <climits>
#include <complex>
#include <limits>
#include <map>
#include <span>
#include <vector>

namespace qlrg {

using Key = std::vector<int>;

inline constexpr int kNoDegreeCap = INT_MAX;
inline constexpr double kPruneThreshold = 1e-14;

class WickPoly {
public:
  WickPoly(ModeSetPtr modes, CovariancePtr ordering, int degree_cap = kNoDegreeCap);

  static WickPoly constant(ModeSetPtr modes, CovariancePtr ordering, cplx value,
                           int degree_cap = kNoDegreeCap);

  const ModeSetPtr& modes() const { return modes_; }
  const CovariancePtr& ordering() const { return ordering_; }
  bool is_plain() const { return ordering_ == nullptr; }
  int degree_cap() const { return degree_cap_; }
  const std::map<Key, cplx>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  int degree() const;

  cplx coeff(const Key& key) const;
  cplx coeff(std::initializer_list<Mode> modes) const;

  // Accumulates value onto the canonical form of key; coefficients that end
  // below the prune threshold are removed.
  void add(Key key, cplx value);
  void add(std::initializer_list<Mode> modes, cplx value);
  Key key_of(std::initializer_list<Mode> modes) const;

  // Reality flag: set when the functional is known to be real on real
  // fields. check_reality() verifies G(-K) = conj(G(K)).
  bool real_flag() const { return real_; }
  void set_real_flag(bool v) { real_ = v; }
  bool check_reality(double tol) const;

  // Same coefficients, different ordering tag.
  WickPoly retagged(CovariancePtr ordering) const;
  WickPoly with_degree_cap(int cap) const;

  WickPoly& operator+=(const WickPoly& other);
  WickPoly& operator-=(const WickPoly& other);
  WickPoly& operator*=(cplx factor);
  friend WickPoly operator+(WickPoly a, const WickPoly& b) { return a += b; }
  friend WickPoly operator-(WickPoly a, const WickPoly& b) { return a -= b; }
  friend WickPoly operator*(WickPoly a, cplx f) { return a *= f; }
  friend WickPoly operator*(cplx f, WickPoly a) { return a *= f; }

  // Coefficientwise add ignoring ordering tags (both must share the window).
  void add_coefficients(const WickPoly& other, cplx scale);

private:
  void check_compatible(const WickPoly& other) const;

  ModeSetPtr modes_;
  CovariancePtr ordering_;
  int degree_cap_;
  std::map<Key, cplx> terms_;
  bool real_ = false;
};

bool same_ordering(const CovariancePtr& a, const CovariancePtr& b);

// Key helpers.
Key canonical_key(Key key);
Key negated_key(const Key& key, const ModeSet& modes);
Mode key_momentum(const Key& key, const ModeSet& modes);
bool is_on_shell(const Key& key, const ModeSet& modes);
// All canonical keys of degree <= max_degree, ordered by degree then
// lexicographically.
std::vector<Key> enumerate_keys(const ModeSet& modes, int max_degree);

// <:K:, :K:> under the ordering measure: prod_n m_n! c_n^{m_n}.
double monomial_norm(const Key& key, std::span<const double> diag);
// The literal weight k! prod_i e^{-n_i^2/L} / (n_i^2 + 1) used by the
// coefficient-space L^2 norm display; kept for comparison only.
double literal_norm_weight(const Key& key, const Covariance& cov);

// Wick ordering -> plain products: :a..a:_C = sum_P prod (-K) prod a.
WickPoly wick_to_plain(const WickPoly& p);
// Plain products -> Wick ordering w.r.t. cov (same sum with +K).
WickPoly plain_to_wick(const WickPoly& p, CovariancePtr cov);
// Re-expresses a polynomial in another ordering (either side may be plain).
WickPoly reorder(const WickPoly& p, CovariancePtr to);

struct MultiplyOptions {
  // Degree cap of the product; < 0 means min of the operands' caps.
  int degree_cap = -1;
  // Signal truncation overflow when the dropped mass exceeds this.
  double overflow_bound = std::numeric_limits<double>::infinity();
};

struct ProductResult {
  WickPoly poly;
  // sum over dropped keys of |G|^2 <:K:,:K:> (plain products weigh 1).
  double dropped_mass = 0.0;
};

// Product of two polynomials with a common ordering; cross contractions
// between the factors carry +K weights.
ProductResult multiply(const WickPoly& p, const WickPoly& q, const MultiplyOptions& opts = {});

// d/da_m, term by term, with a_n treated as independent coordinates.
WickPoly derivative(const WickPoly& p, std::size_t mode_ordinal);
WickPoly derivative(const WickPoly& p, const Mode& m);

cplx evaluate(const WickPoly& p, const FieldSample& f);

// int conj(p) q d mu with mu the common ordering measure.
cplx inner_product(const WickPoly& p, const WickPoly& q);
double norm(const WickPoly& p);

// E_target[p]. Equals the degree-0 coefficient when target is p's ordering.
cplx expectation(const WickPoly& p, const Covariance& target);

// Ratio between the pairing norm <p,p> and the literal coefficient-space
// weight sum_K literal_norm_weight(K) |G(K)|^2.
double literal_norm_ratio(const WickPoly& p);

// Fast repeated evaluation of a fixed polynomial on full coefficient vectors.
class PlainEvaluator {
public:
  explicit PlainEvaluator(const WickPoly& p);
  cplx operator()(std::span<const cplx> values) const;
  std::size_t size() const { return coeffs_.size(); }

private:
  std::vector<cplx> coeffs_;
  std::vector<std::size_t> offsets_;
  std::vector<int> factors_;
};

} // namespace qlrg
