#include "hdmt/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hdmt/precision.hpp"
#include "hdmt/rng.hpp"

namespace hdmt {

namespace {

// Draws one row of N(0, (I-A)^{-1} D (I-A)^{-T}) by forward-substituting
// the banded factor; O(p * tau) per row.
void sample_row(const CholeskyFactors& f, Rng& rng, double* row) {
  const int p = static_cast<int>(f.d_hat.size());
  for (int i = 0; i < p; ++i) {
    double v = std::sqrt(f.d_hat[i]) * rng.normal();
    const int lo = std::max(0, i - f.tau);
    for (int k = lo; k < i; ++k) v += f.a_hat(i, k) * row[k];
    row[i] = v;
  }
}

Matrix sample_matrix(const CholeskyFactors& f, Rng& rng, int rows) {
  Matrix x(rows, f.d_hat.size());
  std::vector<double> buf(f.d_hat.size());
  for (int r = 0; r < rows; ++r) {
    sample_row(f, rng, buf.data());
    for (std::size_t k = 0; k < buf.size(); ++k) x(r, k) = buf[k];
  }
  return x;
}

}  // namespace

BootstrapNull bootstrap_null(const TwoSampleData& data, Method method,
                             const BootstrapOptions& opts, std::uint64_t seed) {
  if (opts.b < 100) {
    throw std::invalid_argument("bootstrap_null: need at least 100 replicates");
  }
  if (method != Method::MultiThresh && method != Method::TransformedMulti) {
    throw std::invalid_argument("bootstrap_null: method must be a multi-level statistic");
  }
  data.validate();

  const CholeskyFactors f1 = one_sample_cholesky_factors(data.x1, opts.tau);
  const CholeskyFactors f2 = one_sample_cholesky_factors(data.x2, opts.tau);
  for (const auto* f : {&f1, &f2}) {
    if ((f->d_hat.array() <= 0.0).any()) {
      throw std::runtime_error("bootstrap_null: covariance estimate not positive definite");
    }
  }

  BootstrapNull bn;
  bn.b = opts.b;
  bn.method = method;
  bn.seed = seed;
  bn.copies.assign(opts.b, 0.0);

  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < opts.b; ++rep) {
    try {
      Rng rng(stream_key({seed, static_cast<std::uint64_t>(rep), 0xb007ULL}));
      TwoSampleData boot;
      boot.x1 = sample_matrix(f1, rng, data.n1());
      boot.x2 = sample_matrix(f2, rng, data.n2());

      double value;
      if (method == Method::MultiThresh) {
        const ComponentStats cs = component_stats(boot, opts.unit_variance);
        value = multi_threshold_statistic(cs, opts.eta, opts.variant).value;
      } else {
        int tau = opts.tau;
        if (opts.reselect_tau) {
          const auto cands = default_band_candidates(boot.n1() + boot.n2(), boot.p());
          tau = select_band_width(boot, cands, opts.select_splits,
                                  stream_key({seed, static_cast<std::uint64_t>(rep),
                                              0x7aULL}));
        }
        const PrecisionEstimate est = fit_banded_cholesky(boot, tau);
        const TransformedData td = transform(boot, est.omega_hat, est.tau, nullptr);
        value = transformed_multi_threshold(td, opts.theta, opts.eta_star).value;
      }
      bn.copies[rep] = value;
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) {
    throw std::runtime_error("bootstrap replicate failed: " + error);
  }

  std::sort(bn.copies.begin(), bn.copies.end());
  return bn;
}

double quantile(const BootstrapNull& bn, double q) {
  if (bn.copies.empty()) throw std::invalid_argument("quantile: no bootstrap copies");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile: q must be in (0,1)");
  const std::size_t n = bn.copies.size();
  const double h = (n - 1) * q;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return bn.copies.back();
  const double frac = h - lo;
  // No-exceedance sentinels sit at -inf; interpolate toward the finite
  // neighbor instead of producing NaN.
  if (!std::isfinite(bn.copies[lo])) {
    return frac > 0.0 ? bn.copies[lo + 1] : bn.copies[lo];
  }
  return bn.copies[lo] + frac * (bn.copies[lo + 1] - bn.copies[lo]);
}

double bootstrap_pvalue(const BootstrapNull& bn, double stat) {
  if (bn.copies.empty()) throw std::invalid_argument("bootstrap_pvalue: no copies");
  const auto it = std::lower_bound(bn.copies.begin(), bn.copies.end(), stat);
  const std::size_t ge = bn.copies.end() - it;
  return (1.0 + static_cast<double>(ge)) / (bn.copies.size() + 1.0);
}

double bootstrap_level_score(const BootstrapNull& bn, double stat) {
  if (bn.copies.empty()) throw std::invalid_argument("bootstrap_level_score: no copies");
  const auto& c = bn.copies;
  const std::size_t n = c.size();
  if (std::isinf(stat) && stat < 0.0) return 1.0;  // no-exceedance sentinel
  if (stat < c.front()) return 1.0;
  if (stat >= c.back()) return std::numeric_limits<double>::min();
  // Largest h with the type-7 interpolant at h not exceeding stat.
  std::size_t i = (std::upper_bound(c.begin(), c.end(), stat) - c.begin()) - 1;
  double h = static_cast<double>(i);
  if (std::isfinite(c[i]) && c[i + 1] > c[i]) h += (stat - c[i]) / (c[i + 1] - c[i]);
  return 1.0 - h / (n - 1);
}

namespace {
TestOutcome bootstrap_outcome(Method method, const MultiThresholdResult& m, double alpha,
                              const BootstrapNull& bn) {
  TestOutcome out;
  out.method = method;
  out.statistic = m.value;
  out.standardized = m.value;
  out.critical_value = quantile(bn, 1.0 - alpha);
  out.alpha = alpha;
  out.reject = !m.no_exceedance && m.value >= out.critical_value;
  out.pvalue = m.no_exceedance ? 1.0 : bootstrap_pvalue(bn, m.value);
  out.source = CriticalSource::Bootstrap;
  return out;
}
}  // namespace

TestOutcome multi_threshold_test_bootstrap(const ComponentStats& cs, double eta,
                                           Variant variant, double alpha,
                                           const BootstrapNull& bn) {
  return bootstrap_outcome(Method::MultiThresh,
                           multi_threshold_statistic(cs, eta, variant), alpha, bn);
}

TestOutcome transformed_test_bootstrap(const TransformedData& td, double theta,
                                       double eta_star, double alpha,
                                       const BootstrapNull& bn) {
  return bootstrap_outcome(Method::TransformedMulti,
                           transformed_multi_threshold(td, theta, eta_star), alpha, bn);
}

}  // namespace hdmt
