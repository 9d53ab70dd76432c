#include "reference/naive_stats.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace hdmt::ref {

double t_component(const Matrix& x1, const Matrix& x2, int k) {
  const int n1 = static_cast<int>(x1.rows());
  const int n2 = static_cast<int>(x2.rows());
  double a = 0.0;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n1; ++j) {
      if (i != j) a += x1(i, k) * x1(j, k);
    }
  }
  a /= static_cast<double>(n1) * (n1 - 1);
  double b = 0.0;
  for (int i = 0; i < n2; ++i) {
    for (int j = 0; j < n2; ++j) {
      if (i != j) b += x2(i, k) * x2(j, k);
    }
  }
  b /= static_cast<double>(n2) * (n2 - 1);
  double c = 0.0;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) c += x1(i, k) * x2(j, k);
  }
  c *= 2.0 / (static_cast<double>(n1) * n2);
  return a + b - c;
}

double m_component(const Matrix& x1, const Matrix& x2, int k) {
  const double d = x1.col(k).mean() - x2.col(k).mean();
  return d * d;
}

double column_variance(const Matrix& x, int k) {
  const double mean = x.col(k).mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    ss += (x(i, k) - mean) * (x(i, k) - mean);
  }
  return ss / (x.rows() - 1);
}

namespace {
double n_eff(const Matrix& x1, const Matrix& x2) {
  return static_cast<double>(x1.rows()) * x2.rows() / (x1.rows() + x2.rows());
}

double scale_of(const TwoSampleData& d, int k) {
  return column_variance(d.x1, k) / d.x1.rows() + column_variance(d.x2, k) / d.x2.rows();
}

bool retained(double value, double lambda) {
  return value > lambda - 1e-12 * std::max(1.0, lambda);
}
}  // namespace

double standardized_nt(const TwoSampleData& d, int k, bool unit_variance) {
  const double t = t_component(d.x1, d.x2, k);
  return unit_variance ? n_eff(d.x1, d.x2) * t : t / scale_of(d, k);
}

double standardized_nm(const TwoSampleData& d, int k, bool unit_variance) {
  const double m = m_component(d.x1, d.x2, k);
  return unit_variance ? n_eff(d.x1, d.x2) * m : m / scale_of(d, k);
}

double cq_statistic(const TwoSampleData& d, bool unit_variance) {
  double sum = 0.0;
  for (int k = 0; k < d.p(); ++k) sum += standardized_nt(d, k, unit_variance);
  return sum;
}

double bs_statistic(const TwoSampleData& d, bool unit_variance) {
  double sum = 0.0;
  for (int k = 0; k < d.p(); ++k) sum += standardized_nm(d, k, unit_variance);
  return sum - d.p();
}

double oracle_statistic(const TwoSampleData& d, std::span<const int> set,
                        bool unit_variance) {
  double sum = 0.0;
  for (int k : set) sum += standardized_nt(d, k, unit_variance);
  return sum;
}

double l1_statistic(const TwoSampleData& d, double s, bool unit_variance) {
  const double lambda = 2.0 * s * std::log(static_cast<double>(d.p()));
  double sum = 0.0;
  for (int k = 0; k < d.p(); ++k) {
    const double v = standardized_nt(d, k, unit_variance);
    if (retained(v + 1.0, lambda)) sum += v;
  }
  return sum;
}

double l2_statistic(const TwoSampleData& d, double s, bool unit_variance) {
  const double lambda = 2.0 * s * std::log(static_cast<double>(d.p()));
  double sum = 0.0;
  for (int k = 0; k < d.p(); ++k) {
    const double v = standardized_nm(d, k, unit_variance);
    if (retained(v, lambda)) sum += v - 1.0;
  }
  return sum;
}

namespace {

MaxScan scan(const std::vector<double>& grid, int p,
             const std::function<double(double)>& stat_at) {
  if (grid.empty()) {
    return {-std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::quiet_NaN(), true};
  }
  const double c = 2.0 / std::sqrt(2.0 * M_PI);
  MaxScan best{-std::numeric_limits<double>::infinity(), grid.front(), false};
  for (double s : grid) {
    const double lam = 2.0 * s * std::log(static_cast<double>(p));
    const double a = std::sqrt(lam);
    const double tail = std::pow(static_cast<double>(p), 1.0 - s);
    const double mu = c * a * tail;
    // Exact second moment of the thresholded sum under standard Gaussian
    // components: the high-level expansion plus the bulk term.
    const double var = c * (std::pow(lam, 1.5) + a) * tail +
                       4.0 * p * 0.5 * std::erfc(a / std::sqrt(2.0));
    const double z = (stat_at(s) - mu) / std::sqrt(var);
    if (z > best.value) {
      best.value = z;
      best.argmax_s = s;
    }
  }
  return best;
}

std::vector<double> dedup_window(std::vector<double> vals, double lo, double hi) {
  std::vector<double> grid;
  for (double s : vals) {
    if (s > lo && s < hi) grid.push_back(s);
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> out;
  for (double s : grid) {
    if (out.empty() || s - out.back() > 1e-12) out.push_back(s);
  }
  return out;
}

}  // namespace

MaxScan multi_scan(const TwoSampleData& d, double eta, bool l1, bool unit_variance) {
  const double two_log_p = 2.0 * std::log(static_cast<double>(d.p()));
  std::vector<double> vals;
  for (int k = 0; k < d.p(); ++k) {
    vals.push_back(standardized_nm(d, k, unit_variance) / two_log_p);
  }
  const auto grid = dedup_window(std::move(vals), 0.0, 1.0 - eta);
  return scan(grid, d.p(), [&](double s) {
    return l1 ? l1_statistic(d, s, unit_variance) : l2_statistic(d, s, unit_variance);
  });
}

double jn_statistic(const Matrix& z1, const Matrix& z2, const Vector& diag, double s) {
  const int p = static_cast<int>(z1.cols());
  const double n = n_eff(z1, z2);
  const double lambda = 2.0 * s * std::log(static_cast<double>(p));
  double sum = 0.0;
  for (int k = 0; k < p; ++k) {
    const double diff = z1.col(k).mean() - z2.col(k).mean();
    const double q = n * diff * diff / diag[k];
    if (retained(q, lambda)) sum += q - 1.0;
  }
  return sum;
}

MaxScan multi_scan_transformed(const Matrix& z1, const Matrix& z2, const Vector& diag,
                               double theta, double eta_star) {
  const int p = static_cast<int>(z1.cols());
  const double n = n_eff(z1, z2);
  const double two_log_p = 2.0 * std::log(static_cast<double>(p));
  std::vector<double> vals;
  for (int k = 0; k < p; ++k) {
    const double diff = z1.col(k).mean() - z2.col(k).mean();
    vals.push_back(n * diff * diff / diag[k] / two_log_p);
  }
  const auto grid = dedup_window(std::move(vals), 1.0 - theta, 1.0 - eta_star);
  return scan(grid, p, [&](double s) { return jn_statistic(z1, z2, diag, s); });
}

double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

std::vector<bool> bh_reject_bruteforce(const std::vector<double>& pvalues, double alpha) {
  const std::size_t m = pvalues.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  // Try every cut point; keep the largest feasible one.
  std::size_t best = 0;
  for (std::size_t k = 1; k <= m; ++k) {
    if (pvalues[order[k - 1]] <= alpha * k / m) best = k;
  }
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < best; ++i) reject[order[i]] = true;
  return reject;
}

}  // namespace hdmt::ref
