#include "hdmt/transform_tests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hdmt {

namespace {

// Row-wise product against a symmetric banded matrix; falls back to a
// dense product when the band covers most of the matrix.
Matrix banded_product(const Matrix& x, const Matrix& omega, int tau) {
  const int p = static_cast<int>(omega.rows());
  if (tau < 0 || 2 * tau + 1 >= p) return x * omega;
  Matrix z(x.rows(), p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int k = 0; k < p; ++k) {
      const int lo = std::max(0, k - tau);
      const int hi = std::min(p - 1, k + tau);
      double acc = 0.0;
      for (int l = lo; l <= hi; ++l) acc += omega(k, l) * x(i, l);
      z(i, k) = acc;
    }
  }
  return z;
}

void check_window(double theta, double eta_star) {
  if (!(theta > 0.0 && theta < 1.0) || !(eta_star > 0.0 && eta_star < theta)) {
    throw std::invalid_argument(
        "transformed test: need 0 < eta_star < theta < 1 for the level window");
  }
}

}  // namespace

Vector TransformedData::standardized_mean_diff_sq() const {
  const double n = n_eff();
  Vector out(p());
  const Vector mean1 = z1.colwise().mean();
  const Vector mean2 = z2.colwise().mean();
  for (int k = 0; k < p(); ++k) {
    if (omega_diag[k] < 1e-12) {
      throw std::runtime_error("transformed statistic: standardizer below 1e-12 at coordinate " +
                               std::to_string(k));
    }
    const double d = mean1[k] - mean2[k];
    out[k] = n * d * d / omega_diag[k];
  }
  return out;
}

TransformedData transform(const TwoSampleData& data, const Matrix& omega,
                          std::optional<int> tau, const Vector* variance_diag) {
  data.validate();
  const int p = data.p();
  if (omega.rows() != p || omega.cols() != p) {
    throw std::invalid_argument("transform: omega must be p x p");
  }
  Matrix banded;
  const Matrix* mult = &omega;
  int tau_eff = -1;
  if (tau) {
    banded = band_matrix(omega, *tau);
    mult = &banded;
    tau_eff = *tau;
  }
  TransformedData td;
  td.z1 = banded_product(data.x1, *mult, tau_eff);
  td.z2 = banded_product(data.x2, *mult, tau_eff);
  td.tau = tau_eff;
  td.omega_diag = variance_diag ? *variance_diag : mult->diagonal();
  if (!td.z1.allFinite() || !td.z2.allFinite()) {
    throw std::runtime_error("transform: non-finite transformed values");
  }
  if (static_cast<int>(td.omega_diag.size()) != p) {
    throw std::invalid_argument("transform: standardizer length mismatch");
  }
  return td;
}

Vector transformed_variance_diag(const Matrix& omega_banded, const Matrix& sigma1,
                                 const Matrix& sigma2, int n1, int n2) {
  const double w1 = static_cast<double>(n2) / (n1 + n2);  // 1 - kappa
  const double w2 = static_cast<double>(n1) / (n1 + n2);  // kappa
  const Matrix mix = w1 * sigma1 + w2 * sigma2;
  const Matrix prod = omega_banded * mix * omega_banded;
  return prod.diagonal();
}

double transformed_threshold_statistic(const TransformedData& td, double s) {
  if (!(s > 0.0 && s <= 1.0)) {
    throw std::invalid_argument("transformed_threshold_statistic: s must be in (0,1]");
  }
  const double lambda = 2.0 * s * std::log(static_cast<double>(td.p()));
  const Vector q = td.standardized_mean_diff_sq();
  double sum = 0.0;
  for (int k = 0; k < td.p(); ++k) {
    if (exceeds_threshold(q[k], lambda)) sum += q[k] - 1.0;
  }
  return sum;
}

std::vector<double> transformed_candidate_grid(const TransformedData& td, double theta,
                                               double eta_star) {
  check_window(theta, eta_star);
  const double two_log_p = 2.0 * std::log(static_cast<double>(td.p()));
  const Vector q = td.standardized_mean_diff_sq();
  std::vector<double> grid;
  for (int k = 0; k < td.p(); ++k) {
    const double s = q[k] / two_log_p;
    if (s > 1.0 - theta && s < 1.0 - eta_star) grid.push_back(s);
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> dedup;
  for (double s : grid) {
    if (dedup.empty() || s - dedup.back() > 1e-12) dedup.push_back(s);
  }
  return dedup;
}

MultiThresholdResult transformed_multi_threshold(const TransformedData& td, double theta,
                                                 double eta_star) {
  const std::vector<double> grid = transformed_candidate_grid(td, theta, eta_star);
  if (grid.empty()) {
    return {-std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::quiet_NaN(), true};
  }
  MultiThresholdResult best{-std::numeric_limits<double>::infinity(), grid.front(), false};
  for (double s : grid) {
    const double j = transformed_threshold_statistic(td, s);
    const NullMoments nm = null_moments_full(s, td.p());
    const double z = (j - nm.mu0) / nm.sigma0;
    if (z > best.value) {
      best.value = z;
      best.argmax_s = s;
    }
  }
  return best;
}

TestOutcome transformed_test(const TransformedData& td, double theta, double eta_star,
                             double alpha) {
  check_window(theta, eta_star);
  const MultiThresholdResult m = transformed_multi_threshold(td, theta, eta_star);
  TestOutcome out;
  out.method = Method::TransformedMulti;
  out.statistic = m.value;
  out.standardized = m.value;
  out.critical_value = gumbel_critical(alpha, td.p(), theta - eta_star);
  out.alpha = alpha;
  out.reject = !m.no_exceedance && m.value >= out.critical_value;
  out.pvalue = m.no_exceedance ? 1.0 : gumbel_upper_tail(m.value, td.p(), theta - eta_star);
  out.source = CriticalSource::Gumbel;
  return out;
}

ClxStatistics clx_statistics(const TwoSampleData& data, const PrecisionEstimate* omega_hat) {
  data.validate();
  const double n = data.n_eff();
  const Vector mean1 = data.x1.colwise().mean();
  const Vector mean2 = data.x2.colwise().mean();
  ClxStatistics out;
  out.g_identity = 0.0;
  for (int k = 0; k < data.p(); ++k) {
    const double d = mean1[k] - mean2[k];
    out.g_identity = std::max(out.g_identity, n * d * d);
  }
  if (omega_hat != nullptr) {
    const TransformedData td =
        transform(data, omega_hat->omega_hat, omega_hat->tau, nullptr);
    out.g_omega = td.standardized_mean_diff_sq().maxCoeff();
  }
  return out;
}

TestOutcome clx_test(double g, int p, double alpha, bool transformed) {
  TestOutcome out;
  out.method = transformed ? Method::ClxOmega : Method::ClxIdentity;
  out.statistic = g;
  out.standardized = g - clx_center(p);
  out.critical_value = clx_critical(alpha, p);
  out.alpha = alpha;
  out.reject = out.standardized >= out.critical_value;
  out.pvalue = clx_upper_tail(out.standardized, p);
  out.source = CriticalSource::ExtremeValue;
  return out;
}

}  // namespace hdmt
