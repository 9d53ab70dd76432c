#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hdmt/two_sample_data.hpp"

namespace hdmt {

/// Banded Cholesky-regression estimate of the precision matrix
/// Omega = {(1-kappa) Sigma_1 + kappa Sigma_2}^{-1}.
struct PrecisionEstimate {
  Matrix a_hat;     // strictly lower triangular regression coefficients, band tau
  Vector d_hat;     // residual variances d_j^2
  Matrix omega_hat; // assembled (I-A)' D^{-1} (I-A) / (1-kappa)
  int tau = 0;
  double kappa = 0.0;
  int floored = 0;  // residual variances clipped at the 1e-10 floor

  Vector omega_diag() const { return omega_hat.diagonal(); }
};

/// Zeroes every entry with |i-j| > tau.  tau = 0 keeps the diagonal only,
/// tau = p-1 is the identity operation.
Matrix band_matrix(const Matrix& m, int tau);

inline constexpr int kPairCap = 2000;
inline constexpr std::uint64_t kPairSeed = 0x5ca1ab1e0ddba11ULL;

/// Regresses each coordinate of the pseudo-observations
/// Y_kl = X_1k - sqrt(n1/n2) X_2l on its tau predecessors and assembles
/// the precision estimate.  When n1*n2 exceeds pair_cap the pairs are
/// subsampled deterministically.  Singular regression Grams fall back to
/// a ridge with penalty 1e-8 * trace.
PrecisionEstimate fit_banded_cholesky(const TwoSampleData& data, int tau,
                                      int pair_cap = kPairCap,
                                      std::uint64_t pair_seed = kPairSeed);

/// One-sample Cholesky-regression factors of a covariance matrix; rows of
/// the input are observations, columns are centered internally.
struct CholeskyFactors {
  Matrix a_hat;
  Vector d_hat;
  int tau = 0;
};

CholeskyFactors one_sample_cholesky_factors(const Matrix& sample, int tau);

/// Factor sets for several band widths sharing one pass over the data.
std::vector<CholeskyFactors> one_sample_cholesky_factors_multi(
    const Matrix& sample, std::span<const int> taus);

/// Lower-triangular L with L L' = (I-A)^{-1} D (I-A)^{-T}.
Matrix cholesky_covariance_factor(const CholeskyFactors& f);

/// Sigma_hat = (I-A)^{-1} D (I-A)^{-T}; positive definite by construction.
Matrix one_sample_covariance_via_cholesky(const Matrix& sample, int tau);

struct BandSelection {
  int tau = 0;
  std::vector<int> candidates;
  std::vector<double> mean_risk;  // average Frobenius distance per candidate (NaN = skipped)
};

/// Random-split risk selection of the band width: N splits, first half
/// fits the Cholesky covariance at each candidate, second half provides
/// the sample covariance, candidates ranked by average Frobenius
/// distance.  Ties go to the smaller width.
BandSelection select_band_width_detail(const Matrix& sample, std::span<const int> candidates,
                                       int n_splits, std::uint64_t seed);

int select_band_width(const Matrix& sample, std::span<const int> candidates, int n_splits,
                      std::uint64_t seed);

/// Two-sample variant: each sample is centered at its own mean and the
/// rows pooled before splitting.
int select_band_width(const TwoSampleData& data, std::span<const int> candidates,
                      int n_splits, std::uint64_t seed);

/// Default candidate set {0, 1, ..., min(20, rows/2, p-1)}.
std::vector<int> default_band_candidates(int rows, int p);

/// Largest singular value of a - b by power iteration (relative
/// tolerance 1e-6).
double spectral_error(const Matrix& a, const Matrix& b);

}  // namespace hdmt
