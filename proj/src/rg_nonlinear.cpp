#include "qlrg/rg_nonlinear.hpp"

#include "qlrg/actions.hpp"
#include "qlrg/error.hpp"
#include "qlrg/parallel.hpp"
#include "qlrg/rg_linear.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace qlrg {

void McConfig::validate() const {
  require(outer_samples >= 2, "outer_samples must be >= 2");
  require(inner_samples >= 2, "inner_samples must be >= 2");
  require(jackknife_blocks >= 2, "jackknife_blocks must be >= 2");
  require(inner_samples % jackknife_blocks == 0, "jackknife_blocks must divide inner_samples");
  require(degree_cap >= 0, "degree_cap must be >= 0");
}

namespace {

// S with its degree-0 coefficient split off, ready for repeated evaluation
// at phi + psi with phi ~ mu_{L,L'}.
class PointwiseKernel {
public:
  PointwiseKernel(const WickPoly& S, double lambda_lo, const McConfig& cfg)
      : eval_(wick_to_plain(without_constant(S))),
        constant_(S.coeff(Key{}).real()),
        modes_(S.modes()),
        blocks_(cfg.jackknife_blocks),
        inner_(cfg.inner_samples) {
    require(!S.is_plain(), "integrate-out needs S Wick-ordered w.r.t. mu_L");
    require(S.real_flag(), "integrate-out needs a real-flagged action");
    const auto& hi = *S.ordering();
    require(lambda_lo > 0.0 && lambda_lo < hi.lambda(), "integrate-out needs 0 < L' < L");
    cfg.validate();
    window_ = WindowCovariance(hi, hi.at_lambda(lambda_lo));
  }

  PointwiseEstimate operator()(std::span<const cplx> psi, RandomStream& rng) const {
    const std::size_t n = modes_->size();
    std::vector<cplx> field(n);
    std::vector<double> s(static_cast<std::size_t>(inner_));
    for (int j = 0; j < inner_; ++j) {
      sample_gaussian_into(*modes_, window_->diagonal(), rng, field);
      for (std::size_t i = 0; i < n; ++i) field[i] += psi[i];
      const double v = eval_(field).real();
      if (v + constant_ < -700.0)
        fail(ErrorCode::unbounded_below, "S[phi + psi] = " + std::to_string(v + constant_) +
                                             " at inner sample " + std::to_string(j) +
                                             "; action suspected unbounded below");
      s[static_cast<std::size_t>(j)] = v;
    }
    const double m = *std::min_element(s.begin(), s.end());
    const int per = inner_ / blocks_;
    std::vector<double> block(static_cast<std::size_t>(blocks_), 0.0);
    double total = 0.0;
    for (int j = 0; j < inner_; ++j) {
      const double x = std::exp(-(s[static_cast<std::size_t>(j)] - m));
      block[static_cast<std::size_t>(j / per)] += x;
    }
    for (double b : block) total += b;

    PointwiseEstimate out;
    const double theta = m - std::log(total / inner_);
    std::vector<double> loo(block.size());
    double mean = 0.0;
    for (std::size_t b = 0; b < block.size(); ++b) {
      loo[b] = m - std::log((total - block[b]) / (inner_ - per));
      mean += loo[b];
    }
    mean /= blocks_;
    double ss = 0.0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    const double B = blocks_;
    out.plain = theta + constant_;
    out.value = B * theta - (B - 1.0) * mean + constant_;
    out.std_error = std::sqrt((B - 1.0) / B * ss);
    return out;
  }

  const ModeSetPtr& modes() const { return modes_; }

private:
  static WickPoly without_constant(const WickPoly& S) {
    WickPoly r = S;
    r.add(Key{}, -S.coeff(Key{}));
    return r;
  }

  PlainEvaluator eval_;
  double constant_;
  ModeSetPtr modes_;
  std::optional<WindowCovariance> window_;
  int blocks_;
  int inner_;
};

void guard_lower_bound(const WickPoly& S, const McConfig& cfg) {
  RandomStream rng(cfg.seed, ~std::uint64_t{0});
  const auto lb = lower_bound_estimate(S, 256, rng);
  if (lb.value < -700.0)
    fail(ErrorCode::unbounded_below, "empirical lower bound " + std::to_string(lb.value) +
                                         " suggests an action unbounded below");
}

} // namespace

PointwiseEstimate integrate_out_pointwise(const WickPoly& S, const FieldSample& psi, double lambda_lo,
                                          const McConfig& cfg, std::uint64_t stream) {
  const PointwiseKernel kernel(S, lambda_lo, cfg);
  require(*psi.modes() == *S.modes(), "psi and S live on different windows");
  RandomStream rng(cfg.seed, stream);
  const auto full = psi.full();
  return kernel(full, rng);
}

ProjectedAction integrate_out(const WickPoly& S, double lambda_lo, const McConfig& cfg, int workers) {
  const PointwiseKernel kernel(S, lambda_lo, cfg);
  guard_lower_bound(S, cfg);
  const auto& modes = kernel.modes();
  const auto lo = make_covariance(modes, lambda_lo, S.ordering()->profile());
  const WickPoly linear = u_apply(S, lambda_lo);
  const PlainEvaluator linear_eval(wick_to_plain(linear));

  const std::size_t N = static_cast<std::size_t>(cfg.outer_samples);
  const std::size_t n = modes->size();
  std::vector<cplx> psis(N * n);
  std::vector<double> y(N), pointwise_se(N);
  parallel_for(N, workers, [&](std::size_t j) {
    std::span<cplx> psi(psis.data() + j * n, n);
    RandomStream outer(cfg.seed, psi_stream(j));
    sample_gaussian_into(*modes, lo->diagonal(), outer, psi);
    RandomStream inner(cfg.seed, inner_stream(j));
    const auto est = kernel(psi, inner);
    y[j] = est.value - (cfg.subtract_linear ? linear_eval(psi).real() : 0.0);
    pointwise_se[j] = est.std_error;
  });

  const auto keys = enumerate_keys(*modes, cfg.degree_cap);
  std::vector<cplx> mean(keys.size());
  std::vector<double> se(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t k) {
    WickPoly basis(modes, lo);
    basis.add(keys[k], 1.0);
    const PlainEvaluator w(wick_to_plain(basis));
    const double nk = monomial_norm(keys[k], lo->diagonal());
    std::vector<cplx> x(N);
    cplx s = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      x[j] = std::conj(w(std::span<const cplx>(psis.data() + j * n, n))) * y[j] / nk;
      s += x[j];
    }
    const cplx m = s / static_cast<double>(N);
    double v = 0.0;
    for (const cplx& xj : x) v += std::norm(xj - m);
    mean[k] = m;
    se[k] = std::sqrt(v / static_cast<double>(N - 1) / static_cast<double>(N));
  });

  ProjectedAction out{WickPoly(modes, lo, cfg.degree_cap), {}, false, 0.0};
  bool any_on_shell = false, all_noisy = true;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    cplx g = mean[k];
    if (cfg.subtract_linear) g += linear.coeff(keys[k]);
    out.poly.add(keys[k], g);
    out.std_error[keys[k]] = se[k];
    if (!keys[k].empty() && is_on_shell(keys[k], *modes)) {
      any_on_shell = true;
      if (se[k] <= std::abs(g)) all_noisy = false;
    }
  }
  out.poly.set_real_flag(true);
  out.useless = any_on_shell && all_noisy;
  for (double e : pointwise_se) out.max_pointwise_error = std::max(out.max_pointwise_error, e);
  return out;
}

JensenReport jensen_check(const WickPoly& S, int psi_draws, double lambda_lo, const McConfig& cfg,
                          double k_sigma, int workers) {
  require(psi_draws >= 1, "need at least one psi draw");
  const PointwiseKernel kernel(S, lambda_lo, cfg);
  const auto& modes = kernel.modes();
  const auto lo = make_covariance(modes, lambda_lo, S.ordering()->profile());
  const PlainEvaluator linear(wick_to_plain(u_apply(S, lambda_lo)));

  JensenReport rep;
  rep.k_sigma = k_sigma;
  rep.entries.resize(static_cast<std::size_t>(psi_draws));
  parallel_for(rep.entries.size(), workers, [&](std::size_t j) {
    std::vector<cplx> psi(modes->size());
    RandomStream outer(cfg.seed, psi_stream(j));
    sample_gaussian_into(*modes, lo->diagonal(), outer, psi);
    RandomStream inner(cfg.seed, inner_stream(j));
    const auto est = kernel(psi, inner);
    JensenEntry& e = rep.entries[j];
    e.value = est.value;
    e.std_error = est.std_error;
    e.linear = linear(psi).real();
    const double excess = e.value - e.linear;
    e.excess_sigma = e.std_error > 0.0 ? excess / e.std_error : 0.0;
    e.violation = excess > k_sigma * e.std_error;
  });
  for (const auto& e : rep.entries) rep.violations += e.violation ? 1 : 0;
  return rep;
}

} // namespace qlrg
