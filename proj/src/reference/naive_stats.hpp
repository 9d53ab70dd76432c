#pragma once

// Serial, literal transcriptions of the statistics used as oracles by the
// test suites and as the baseline in the benchmarks.  Nothing here shares
// code with the optimized implementations.

#include <span>
#include <vector>

#include "hdmt/two_sample_data.hpp"

namespace hdmt::ref {

/// Triple-loop pairwise U-statistic for one coordinate.
double t_component(const Matrix& x1, const Matrix& x2, int k);

/// Squared mean difference for one coordinate.
double m_component(const Matrix& x1, const Matrix& x2, int k);

/// Unbiased sample variance of one column.
double column_variance(const Matrix& x, int k);

/// Standardized n*T_k analogue (matches the library's folding of the
/// n-factor into the estimated scale).
double standardized_nt(const TwoSampleData& d, int k, bool unit_variance);
double standardized_nm(const TwoSampleData& d, int k, bool unit_variance);

double cq_statistic(const TwoSampleData& d, bool unit_variance);
double bs_statistic(const TwoSampleData& d, bool unit_variance);
double oracle_statistic(const TwoSampleData& d, std::span<const int> set, bool unit_variance);

/// Thresholded sums at level 2 s log p; retention is strictly-above with
/// the same 1e-12 relative boundary guard the library documents.
double l1_statistic(const TwoSampleData& d, double s, bool unit_variance);
double l2_statistic(const TwoSampleData& d, double s, bool unit_variance);

struct MaxScan {
  double value;
  double argmax_s;
  bool empty;
};

/// Exhaustive scan of the standardized thresholding statistic over the
/// candidate levels in (0, 1 - eta).
MaxScan multi_scan(const TwoSampleData& d, double eta, bool l1, bool unit_variance);

/// Transformed statistics from an explicit multiplier and standardizer.
double jn_statistic(const Matrix& z1, const Matrix& z2, const Vector& diag, double s);
MaxScan multi_scan_transformed(const Matrix& z1, const Matrix& z2, const Vector& diag,
                               double theta, double eta_star);

/// Largest singular value via full Jacobi SVD.
double spectral_norm(const Matrix& m);

/// Step-up rejections found by brute-force search over all cut points.
std::vector<bool> bh_reject_bruteforce(const std::vector<double>& pvalues, double alpha);

}  // namespace hdmt::ref
