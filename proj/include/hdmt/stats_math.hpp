#pragma once

#include <optional>

namespace hdmt {

/// Standard normal density.
double normal_pdf(double x);

/// Standard normal CDF Phi(x).
double normal_cdf(double x);

/// Upper tail Phi_bar(x) = 1 - Phi(x), accurate in the far tail.
double normal_sf(double x);

/// Upper-alpha quantile z_alpha, i.e. normal_sf(z_alpha) = alpha.
double normal_upper_quantile(double alpha);

/// Closed-form null mean and standard deviation of the thresholding
/// statistic at level s with dimension p.
struct NullMoments {
  double mu0;
  double sigma0;
  double s;
  int p;
};

/// mu0 = 2/sqrt(2*pi) * sqrt(2*s*log p) * p^(1-s),
/// sigma0^2 = 2/sqrt(2*pi) * ((2*s*log p)^{3/2} + (2*s*log p)^{1/2}) * p^(1-s).
/// Requires s in (0, 1] and p >= 2.
NullMoments null_moments(double s, int p);

/// Same mean, with the variance carrying the bulk term
/// 4 p Phi_bar(sqrt(2 s log p)).  The extra term vanishes at high levels
/// but keeps the normalization at the exact second moment when the level
/// retains a non-trivial fraction of the coordinates; the multi-level
/// statistics standardize with this form so their grid scan stays sane at
/// the small attained levels.
NullMoments null_moments_full(double s, int p);

/// a(y) = sqrt(2 log y) from the Gumbel limit of the max statistic.
double gumbel_a(double y);

/// b(y, eta) = 2 log y + (1/2) log log y - (1/2) log(4*pi/(1-eta)^2).
double gumbel_b(double y, double eta);

/// Critical value {q_alpha + b(log p, eta)} / a(log p) with
/// q_alpha = -log(-log(1-alpha)).  Requires p >= 3 (finite-p caveat:
/// callers with p <= 2 should calibrate by bootstrap instead).
double gumbel_critical(double alpha, int p, double eta);

/// P(M >= m) under the Gumbel limit with window parameter eta.
double gumbel_upper_tail(double m, int p, double eta);

/// Upper-alpha quantile of the max-norm limit law exp(-pi^{-1/2} e^{-x/2}),
/// defined on the centered statistic G - 2 log p + log log p.
double clx_critical(double alpha, int p);

/// Centering sequence 2 log p - log log p for the max-norm statistics.
double clx_center(int p);

/// P(G - center >= g) under the max-norm limit law.
double clx_upper_tail(double g, int p);

struct DetectionPoint {
  double beta;                  // sparsity, in (1/2, 1)
  double r = 0.0;               // signal strength (carried, not used here)
  std::optional<double> theta;  // dimension-growth index, in (0,1)
};

struct BoundaryValue {
  double rho;
  std::optional<double> rho_theta;
};

/// Phase-transition curves: rho(beta) for the untransformed multi-level
/// test and rho_theta(beta) for the transformed test with estimated
/// precision matrix.
BoundaryValue detection_boundary(const DetectionPoint& pt);

}  // namespace hdmt
