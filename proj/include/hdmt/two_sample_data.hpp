#pragma once

#include <Eigen/Dense>

namespace hdmt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Two aligned observation matrices, one row per subject.
struct TwoSampleData {
  Matrix x1;  // n1 x p
  Matrix x2;  // n2 x p

  int p() const { return static_cast<int>(x1.cols()); }
  int n1() const { return static_cast<int>(x1.rows()); }
  int n2() const { return static_cast<int>(x2.rows()); }

  /// Effective sample size n = n1 n2 / (n1 + n2).
  double n_eff() const {
    return static_cast<double>(n1()) * n2() / (n1() + n2());
  }

  /// Mixture weight kappa = n1 / (n1 + n2).
  double kappa() const { return static_cast<double>(n1()) / (n1() + n2()); }

  /// Throws std::invalid_argument on shape mismatch, fewer than two rows
  /// per sample, or non-finite entries.
  void validate() const;
};

/// Per-coordinate building blocks shared by every test statistic.
struct ComponentStats {
  Vector t;      // pairwise U-statistic per coordinate
  Vector m;      // squared mean difference per coordinate
  Vector scale;  // sigma1_kk/n1 + sigma2_kk/n2, or all ones when variances are known
  bool unit_variance = false;
  int n1 = 0;
  int n2 = 0;

  int p() const { return static_cast<int>(t.size()); }
  double n_eff() const { return static_cast<double>(n1) * n2 / (n1 + n2); }

  /// Standardized analogue of n*T_k: equals n_eff*t[k] with known unit
  /// variances and t[k]/scale[k] otherwise (1/scale is then the n-factor).
  double nt(int k) const { return unit_variance ? n_eff() * t[k] : t[k] / scale[k]; }

  /// Standardized analogue of n*M_k.
  double nm(int k) const { return unit_variance ? n_eff() * m[k] : m[k] / scale[k]; }
};

/// Computes the per-coordinate U-statistics, squared mean differences and
/// standardizers.  With known_unit_variance the scale is fixed at one;
/// otherwise unbiased sample variances are used and a coordinate whose
/// variance falls below 1e-12 in either sample is reported as degenerate.
ComponentStats component_stats(const TwoSampleData& data, bool known_unit_variance);

}  // namespace hdmt
