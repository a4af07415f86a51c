#include "qlrg/wick.hpp"

#include "qlrg/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <unordered_map>

namespace qlrg {

namespace {

// Mode multiplicities of a key, one byte per ordinal; used as a hashable
// working representation inside the algebra kernels.
using Counts = std::string;

Counts to_counts(const Key& key, std::size_t n) {
  Counts c(n, '\0');
  for (int i : key) ++c[static_cast<std::size_t>(i)];
  return c;
}

Key from_counts(const Counts& c) {
  Key key;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int k = 0; k < static_cast<unsigned char>(c[i]); ++k) key.push_back(static_cast<int>(i));
  return key;
}

int mult(const Counts& c, int i) { return static_cast<unsigned char>(c[static_cast<std::size_t>(i)]); }

int counts_degree(const Counts& c) {
  int d = 0;
  for (char v : c) d += static_cast<unsigned char>(v);
  return d;
}

double factorial(int n) {
  static const auto table = [] {
    std::array<double, 171> t{};
    t[0] = 1.0;
    for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] * static_cast<double>(i);
    return t;
  }();
  return table[static_cast<std::size_t>(n)];
}

double binom(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// Contraction classes: {0} and one {n, -n} per representative. For the zero
// class first == second.
struct ModeClass {
  int first;
  int second;
};

std::vector<ModeClass> mode_classes(const ModeSet& m) {
  std::vector<ModeClass> out;
  const int z = static_cast<int>(m.zero_index());
  out.push_back({z, z});
  for (std::size_t r : m.representatives())
    out.push_back({static_cast<int>(r), static_cast<int>(m.negated(r))});
  return out;
}

// Enumerates the self-contractions of one monomial: each contracted {n,-n}
// (or {0,0}) pair contributes weight[first]. emit(factor, remaining counts).
template <class Emit>
void self_contractions(const std::vector<ModeClass>& classes, std::size_t ci, Counts& c,
                       double factor, std::span<const double> weight, Emit& emit) {
  if (ci == classes.size()) {
    emit(factor, c);
    return;
  }
  const ModeClass cl = classes[ci];
  const double w = weight[static_cast<std::size_t>(cl.first)];
  if (cl.first == cl.second) {
    const int m = mult(c, cl.first);
    if (m < 2 || w == 0.0) {
      self_contractions(classes, ci + 1, c, factor, weight, emit);
      return;
    }
    for (int j = 0; 2 * j <= m; ++j) {
      // m! / (j! 2^j (m-2j)!) ways to pick j disjoint pairs.
      const double ways = factorial(m) / (factorial(j) * std::ldexp(1.0, j) * factorial(m - 2 * j));
      c[static_cast<std::size_t>(cl.first)] = static_cast<char>(m - 2 * j);
      self_contractions(classes, ci + 1, c, factor * ways * std::pow(w, j), weight, emit);
    }
    c[static_cast<std::size_t>(cl.first)] = static_cast<char>(m);
    return;
  }
  const int p = mult(c, cl.first), q = mult(c, cl.second);
  if (p == 0 || q == 0 || w == 0.0) {
    self_contractions(classes, ci + 1, c, factor, weight, emit);
    return;
  }
  for (int j = 0; j <= std::min(p, q); ++j) {
    const double ways = binom(p, j) * binom(q, j) * factorial(j);
    c[static_cast<std::size_t>(cl.first)] = static_cast<char>(p - j);
    c[static_cast<std::size_t>(cl.second)] = static_cast<char>(q - j);
    self_contractions(classes, ci + 1, c, factor * ways * std::pow(w, j), weight, emit);
  }
  c[static_cast<std::size_t>(cl.first)] = static_cast<char>(p);
  c[static_cast<std::size_t>(cl.second)] = static_cast<char>(q);
}

// Enumerates contractions between the factors of two monomials (never
// within one factor). `out` starts as a + b and is decremented per option.
template <class Emit>
void cross_contractions(const std::vector<ModeClass>& classes, std::size_t ci, const Counts& a,
                        const Counts& b, Counts& out, double factor, std::span<const double> cov,
                        Emit& emit) {
  if (ci == classes.size()) {
    emit(factor, out);
    return;
  }
  const ModeClass cl = classes[ci];
  const double c = cov[static_cast<std::size_t>(cl.first)];
  const auto f = static_cast<std::size_t>(cl.first);
  const auto s = static_cast<std::size_t>(cl.second);
  if (cl.first == cl.second) {
    const int ma = mult(a, cl.first), mb = mult(b, cl.first);
    const int top = c == 0.0 ? 0 : std::min(ma, mb);
    for (int i = 0; i <= top; ++i) {
      const double ways = binom(ma, i) * binom(mb, i) * factorial(i);
      out[f] = static_cast<char>(ma + mb - 2 * i);
      cross_contractions(classes, ci + 1, a, b, out, factor * ways * std::pow(c, i), cov, emit);
    }
    out[f] = static_cast<char>(ma + mb);
    return;
  }
  const int ap = mult(a, cl.first), am = mult(a, cl.second);
  const int bp = mult(b, cl.first), bm = mult(b, cl.second);
  // i: a's n with b's -n; j: a's -n with b's n.
  const int top_i = c == 0.0 ? 0 : std::min(ap, bm);
  const int top_j = c == 0.0 ? 0 : std::min(am, bp);
  for (int i = 0; i <= top_i; ++i) {
    const double wi = binom(ap, i) * binom(bm, i) * factorial(i);
    for (int j = 0; j <= top_j; ++j) {
      const double wj = binom(am, j) * binom(bp, j) * factorial(j);
      out[f] = static_cast<char>(ap - i + bp - j);
      out[s] = static_cast<char>(am - j + bm - i);
      cross_contractions(classes, ci + 1, a, b, out, factor * wi * wj * std::pow(c, i + j), cov,
                         emit);
    }
  }
  out[f] = static_cast<char>(ap + bp);
  out[s] = static_cast<char>(am + bm);
}

double counts_norm(const Counts& c, std::span<const double> diag) {
  double v = 1.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int m = static_cast<unsigned char>(c[i]);
    if (m) v *= factorial(m) * std::pow(diag[i], m);
  }
  return v;
}

// Value of all full contractions of a plain monomial under weights w:
// (m-1)!! w_0^{m/2} on the zero class, p! w_n^p on {n,-n} when p == q.
double full_contraction(const std::vector<ModeClass>& classes, const Counts& c,
                        std::span<const double> w) {
  double v = 1.0;
  for (const auto& cl : classes) {
    const double wt = w[static_cast<std::size_t>(cl.first)];
    if (cl.first == cl.second) {
      const int m = mult(c, cl.first);
      if (m % 2) return 0.0;
      if (m) {
        double dfact = 1.0;
        for (int k = m - 1; k > 1; k -= 2) dfact *= k;
        v *= dfact * std::pow(wt, m / 2);
      }
    } else {
      const int p = mult(c, cl.first), q = mult(c, cl.second);
      if (p != q) return 0.0;
      if (p) v *= factorial(p) * std::pow(wt, p);
    }
  }
  return v;
}

std::vector<double> diag_or_zero(const CovariancePtr& cov, std::size_t n) {
  if (!cov) return std::vector<double>(n, 0.0);
  return {cov->diagonal().begin(), cov->diagonal().end()};
}

} // namespace

bool same_ordering(const CovariancePtr& a, const CovariancePtr& b) {
  if (!a || !b) return a == b;
  return a->same_as(*b);
}

WickPoly::WickPoly(ModeSetPtr modes, CovariancePtr ordering, int degree_cap)
    : modes_(std::move(modes)), ordering_(std::move(ordering)), degree_cap_(degree_cap) {
  require(modes_ != nullptr, "polynomial needs a mode set");
  require(degree_cap_ >= 0, "degree cap must be nonnegative");
  if (ordering_) require(*ordering_->modes() == *modes_, "ordering covariance lives on another window");
}

WickPoly WickPoly::constant(ModeSetPtr modes, CovariancePtr ordering, cplx value, int degree_cap) {
  WickPoly p(std::move(modes), std::move(ordering), degree_cap);
  p.add(Key{}, value);
  p.real_ = value.imag() == 0.0;
  return p;
}

int WickPoly::degree() const {
  int d = 0;
  for (const auto& [k, v] : terms_) d = std::max(d, static_cast<int>(k.size()));
  return d;
}

cplx WickPoly::coeff(const Key& key) const {
  auto it = terms_.find(canonical_key(key));
  return it == terms_.end() ? cplx{} : it->second;
}

cplx WickPoly::coeff(std::initializer_list<Mode> modes) const { return coeff(key_of(modes)); }

Key WickPoly::key_of(std::initializer_list<Mode> modes) const {
  Key key;
  for (const Mode& m : modes) key.push_back(static_cast<int>(modes_->index_of(m)));
  return canonical_key(std::move(key));
}

void WickPoly::add(Key key, cplx value) {
  key = canonical_key(std::move(key));
  for (int i : key)
    require(i >= 0 && static_cast<std::size_t>(i) < modes_->size(), "key ordinal outside the window");
  require(static_cast<int>(key.size()) <= degree_cap_, "term degree exceeds the degree cap");
  auto [it, inserted] = terms_.try_emplace(std::move(key), value);
  if (!inserted) it->second += value;
  if (std::abs(it->second) < kPruneThreshold) terms_.erase(it);
}

void WickPoly::add(std::initializer_list<Mode> modes, cplx value) { add(key_of(modes), value); }

bool WickPoly::check_reality(double tol) const {
  for (const auto& [k, v] : terms_) {
    const cplx mirror = coeff(negated_key(k, *modes_));
    if (std::abs(mirror - std::conj(v)) > tol) return false;
  }
  return true;
}

WickPoly WickPoly::retagged(CovariancePtr ordering) const {
  WickPoly out = *this;
  if (ordering) require(*ordering->modes() == *modes_, "ordering covariance lives on another window");
  out.ordering_ = std::move(ordering);
  return out;
}

WickPoly WickPoly::with_degree_cap(int cap) const {
  require(cap >= degree(), "new degree cap is below the polynomial degree");
  WickPoly out = *this;
  out.degree_cap_ = cap;
  return out;
}

void WickPoly::check_compatible(const WickPoly& other) const {
  require(*modes_ == *other.modes_, "polynomials live on different windows");
  if (!same_ordering(ordering_, other.ordering_))
    fail(ErrorCode::ordering_mismatch, "polynomials are Wick ordered w.r.t. different covariances");
}

WickPoly& WickPoly::operator+=(const WickPoly& other) {
  check_compatible(other);
  add_coefficients(other, 1.0);
  return *this;
}

WickPoly& WickPoly::operator-=(const WickPoly& other) {
  check_compatible(other);
  add_coefficients(other, -1.0);
  return *this;
}

WickPoly& WickPoly::operator*=(cplx factor) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= factor;
    if (std::abs(it->second) < kPruneThreshold)
      it = terms_.erase(it);
    else
      ++it;
  }
  real_ = real_ && factor.imag() == 0.0;
  return *this;
}

void WickPoly::add_coefficients(const WickPoly& other, cplx scale) {
  require(*modes_ == *other.modes_, "polynomials live on different windows");
  for (const auto& [k, v] : other.terms_) add(k, scale * v);
  real_ = real_ && other.real_ && scale.imag() == 0.0;
}

Key canonical_key(Key key) {
  std::sort(key.begin(), key.end());
  return key;
}

Key negated_key(const Key& key, const ModeSet& modes) {
  Key out;
  out.reserve(key.size());
  for (int i : key) out.push_back(static_cast<int>(modes.negated(static_cast<std::size_t>(i))));
  return canonical_key(std::move(out));
}

Mode key_momentum(const Key& key, const ModeSet& modes) {
  std::vector<int> total(static_cast<std::size_t>(modes.dim()), 0);
  for (int i : key) {
    const Mode& n = modes[static_cast<std::size_t>(i)];
    for (int a = 0; a < modes.dim(); ++a) total[static_cast<std::size_t>(a)] += n[a];
  }
  return Mode(std::move(total));
}

bool is_on_shell(const Key& key, const ModeSet& modes) { return key_momentum(key, modes).is_zero(); }

std::vector<Key> enumerate_keys(const ModeSet& modes, int max_degree) {
  std::vector<Key> out;
  const int n = static_cast<int>(modes.size());
  for (int deg = 0; deg <= max_degree; ++deg) {
    Key k(static_cast<std::size_t>(deg), 0);
    while (true) {
      out.push_back(k);
      int pos = deg - 1;
      while (pos >= 0 && k[static_cast<std::size_t>(pos)] == n - 1) --pos;
      if (pos < 0) break;
      const int v = k[static_cast<std::size_t>(pos)] + 1;
      for (int q = pos; q < deg; ++q) k[static_cast<std::size_t>(q)] = v;
    }
  }
  return out;
}

double monomial_norm(const Key& key, std::span<const double> diag) {
  return counts_norm(to_counts(key, diag.size()), diag);
}

double literal_norm_weight(const Key& key, const Covariance& cov) {
  double w = factorial(static_cast<int>(key.size()));
  for (int i : key) {
    const double n2 = static_cast<double>((*cov.modes())[static_cast<std::size_t>(i)].norm2());
    w *= std::exp(-n2 / cov.lambda()) / (n2 + 1.0);
  }
  return w;
}

WickPoly reorder(const WickPoly& p, CovariancePtr to) {
  const auto& modes = *p.modes();
  const std::size_t n = modes.size();
  WickPoly out(p.modes(), to, p.degree_cap());
  out.set_real_flag(p.real_flag());
  const auto from_d = diag_or_zero(p.ordering(), n);
  const auto to_d = diag_or_zero(to, n);
  // :A:_from = sum_P prod (-(from - to)) :rest:_to
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) weight[i] = to_d[i] - from_d[i];
  const auto classes = mode_classes(modes);
  std::map<Key, cplx> acc;
  for (const auto& [key, g] : p.terms()) {
    Counts c = to_counts(key, n);
    auto emit = [&](double factor, const Counts& rest) { acc[from_counts(rest)] += factor * g; };
    self_contractions(classes, 0, c, 1.0, weight, emit);
  }
  for (auto& [k, v] : acc) out.add(k, v);
  return out;
}

WickPoly wick_to_plain(const WickPoly& p) { return p.is_plain() ? p : reorder(p, nullptr); }

WickPoly plain_to_wick(const WickPoly& p, CovariancePtr cov) {
  require(p.is_plain(), "plain_to_wick expects a plain polynomial");
  require(cov != nullptr, "plain_to_wick needs a covariance");
  return reorder(p, std::move(cov));
}

ProductResult multiply(const WickPoly& p, const WickPoly& q, const MultiplyOptions& opts) {
  require(*p.modes() == *q.modes(), "polynomials live on different windows");
  if (!same_ordering(p.ordering(), q.ordering()))
    fail(ErrorCode::ordering_mismatch, "factors are Wick ordered w.r.t. different covariances");
  const auto& modes = *p.modes();
  const std::size_t n = modes.size();
  const int cap = opts.degree_cap >= 0 ? opts.degree_cap : std::min(p.degree_cap(), q.degree_cap());
  const auto cov = diag_or_zero(p.ordering(), n);
  const auto classes = mode_classes(modes);

  std::vector<std::pair<Counts, cplx>> qa;
  qa.reserve(q.size());
  for (const auto& [k, v] : q.terms()) qa.emplace_back(to_counts(k, n), v);

  std::unordered_map<Counts, cplx> acc;
  Counts out(n, '\0');
  for (const auto& [kp, gp] : p.terms()) {
    const Counts a = to_counts(kp, n);
    for (const auto& [b, gq] : qa) {
      const cplx g = gp * gq;
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<char>(a[i] + b[i]);
      auto emit = [&](double factor, const Counts& rest) { acc[rest] += factor * g; };
      cross_contractions(classes, 0, a, b, out, 1.0, cov, emit);
    }
  }

  std::vector<std::pair<Counts, cplx>> sorted(acc.begin(), acc.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  ProductResult res{WickPoly(p.modes(), p.ordering(), cap), 0.0};
  for (const auto& [c, v] : sorted) {
    if (counts_degree(c) > cap) {
      res.dropped_mass += std::norm(v) * (p.is_plain() ? 1.0 : counts_norm(c, cov));
      continue;
    }
    res.poly.add(from_counts(c), v);
  }
  res.poly.set_real_flag(p.real_flag() && q.real_flag());
  if (res.dropped_mass > opts.overflow_bound)
    fail(ErrorCode::truncation_overflow,
         "product truncation dropped mass " + std::to_string(res.dropped_mass) +
             " exceeds bound " + std::to_string(opts.overflow_bound));
  return res;
}

WickPoly derivative(const WickPoly& p, std::size_t m) {
  require(m < p.modes()->size(), "derivative mode outside the window");
  WickPoly out(p.modes(), p.ordering(), p.degree_cap());
  const int mi = static_cast<int>(m);
  for (const auto& [key, g] : p.terms()) {
    const auto mult_m = std::count(key.begin(), key.end(), mi);
    if (mult_m == 0) continue;
    Key rest = key;
    rest.erase(std::find(rest.begin(), rest.end(), mi));
    out.add(std::move(rest), static_cast<double>(mult_m) * g);
  }
  return out;
}

WickPoly derivative(const WickPoly& p, const Mode& m) { return derivative(p, p.modes()->index_of(m)); }

cplx evaluate(const WickPoly& p, const FieldSample& f) {
  require(*f.modes() == *p.modes(), "field and polynomial live on different windows");
  return PlainEvaluator(p)(f.full());
}

cplx inner_product(const WickPoly& p, const WickPoly& q) {
  require(*p.modes() == *q.modes(), "polynomials live on different windows");
  if (p.is_plain() || q.is_plain() || !same_ordering(p.ordering(), q.ordering()))
    fail(ErrorCode::ordering_mismatch,
         "inner product needs both polynomials Wick ordered w.r.t. the same covariance");
  const auto diag = p.ordering()->diagonal();
  cplx s{};
  // Distinct canonical multisets are orthogonal.
  auto it = p.terms().begin();
  auto jt = q.terms().begin();
  while (it != p.terms().end() && jt != q.terms().end()) {
    if (it->first < jt->first) {
      ++it;
    } else if (jt->first < it->first) {
      ++jt;
    } else {
      s += std::conj(it->second) * jt->second * monomial_norm(it->first, diag);
      ++it;
      ++jt;
    }
  }
  return s;
}

double norm(const WickPoly& p) { return std::sqrt(std::max(0.0, inner_product(p, p).real())); }

cplx expectation(const WickPoly& p, const Covariance& target) {
  require(*target.modes() == *p.modes(), "target covariance lives on another window");
  if (p.ordering() && p.ordering()->same_as(target)) return p.coeff(Key{});
  const auto& modes = *p.modes();
  const std::size_t n = modes.size();
  const auto from_d = diag_or_zero(p.ordering(), n);
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) weight[i] = target[i] - from_d[i];
  const auto classes = mode_classes(modes);
  cplx s{};
  for (const auto& [key, g] : p.terms()) s += g * full_contraction(classes, to_counts(key, n), weight);
  return s;
}

double literal_norm_ratio(const WickPoly& p) {
  require(!p.is_plain(), "norm comparison needs a Wick ordered polynomial");
  double pairing = 0.0, literal = 0.0;
  for (const auto& [k, v] : p.terms()) {
    pairing += std::norm(v) * monomial_norm(k, p.ordering()->diagonal());
    literal += std::norm(v) * literal_norm_weight(k, *p.ordering());
  }
  return literal == 0.0 ? 1.0 : pairing / literal;
}

PlainEvaluator::PlainEvaluator(const WickPoly& p) {
  const WickPoly plain = wick_to_plain(p);
  offsets_.push_back(0);
  for (const auto& [k, v] : plain.terms()) {
    coeffs_.push_back(v);
    factors_.insert(factors_.end(), k.begin(), k.end());
    offsets_.push_back(factors_.size());
  }
}

cplx PlainEvaluator::operator()(std::span<const cplx> values) const {
  cplx total{};
  for (std::size_t t = 0; t < coeffs_.size(); ++t) {
    cplx term = coeffs_[t];
    for (std::size_t j = offsets_[t]; j < offsets_[t + 1]; ++j)
      term *= values[static_cast<std::size_t>(factors_[j])];
    total += term;
  }
  return total;
}

} // namespace qlrg
