#pragma once

#include <cstdint>
#include <vector>

#include "hdmt/core_tests.hpp"
#include "hdmt/transform_tests.hpp"
#include "hdmt/two_sample_data.hpp"

namespace hdmt {

/// Sorted bootstrap copies of a multi-level statistic under the
/// parametric null.
struct BootstrapNull {
  std::vector<double> copies;  // ascending
  int b = 0;
  Method method = Method::MultiThresh;
  std::uint64_t seed = 0;
};

struct BootstrapOptions {
  int b = 300;
  int tau = 0;                 // band width for the covariance fits (and the
                               // transformed statistic, unless reselect_tau)
  bool reselect_tau = false;   // re-run band-width selection per replicate
  int select_splits = 20;
  double eta = 0.05;           // untransformed window
  double theta = 0.5;          // transformed window
  double eta_star = 0.05;
  bool unit_variance = true;   // standardization of the untransformed statistic
  Variant variant = Variant::L2;
};

/// Parametric bootstrap of the null distribution: Sigma_i are estimated
/// by one-sample banded Cholesky fits, resamples are drawn from
/// N(0, Sigma_hat_i), and the chosen multi-level statistic is recomputed
/// on every resample (for the transformed statistic the precision matrix
/// is re-estimated inside each replicate).  Copies are deterministic in
/// (data, method, options, seed) regardless of worker count.
BootstrapNull bootstrap_null(const TwoSampleData& data, Method method,
                             const BootstrapOptions& opts, std::uint64_t seed);

/// Type-7 interpolated empirical quantile, q in (0,1).
double quantile(const BootstrapNull& bn, double q);

/// (1 + #{copies >= stat}) / (b + 1).
double bootstrap_pvalue(const BootstrapNull& bn, double stat);

/// Smallest nominal level at which stat >= quantile(copies, 1 - level);
/// rejecting when this score is <= alpha reproduces the critical-value
/// rule exactly.
double bootstrap_level_score(const BootstrapNull& bn, double stat);

/// Multi-level test with the critical value replaced by the bootstrap
/// (1 - alpha) quantile.
TestOutcome multi_threshold_test_bootstrap(const ComponentStats& cs, double eta,
                                           Variant variant, double alpha,
                                           const BootstrapNull& bn);

TestOutcome transformed_test_bootstrap(const TransformedData& td, double theta,
                                       double eta_star, double alpha,
                                       const BootstrapNull& bn);

}  // namespace hdmt
