#include "hdmt/precision.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hdmt/rng.hpp"

namespace hdmt {

namespace {
constexpr double kResidFloor = 1e-10;

// Least squares a = G^{-1} c with a ridge retry when the Gram is not
// numerically positive definite.
Vector solve_gram(Matrix gram, const Vector& c) {
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success) {
    Vector a = llt.solve(c);
    if (a.allFinite()) return a;
  }
  const double ridge = 1e-8 * gram.trace();
  gram.diagonal().array() += (ridge > 0.0 ? ridge : 1e-8);
  Eigen::LDLT<Matrix> ldlt(gram);
  Vector a = ldlt.solve(c);
  if (!a.allFinite()) {
    throw std::runtime_error("banded Cholesky regression: singular Gram matrix");
  }
  return a;
}

// Assembles (I-A)' D^{-1} (I-A) exploiting the band: row k of (I-A) has
// support [k-tau, k].
Matrix assemble_precision(const Matrix& a_hat, const Vector& d_hat, int tau) {
  const int p = static_cast<int>(d_hat.size());
  Matrix omega = Matrix::Zero(p, p);
  std::vector<double> row(tau + 1);
  for (int k = 0; k < p; ++k) {
    const int lo = std::max(0, k - tau);
    const int w = k - lo;
    for (int i = 0; i < w; ++i) row[i] = -a_hat(k, lo + i);
    row[w] = 1.0;
    const double inv_d = 1.0 / d_hat[k];
    for (int i = 0; i <= w; ++i) {
      const double ri = row[i] * inv_d;
      for (int j = i; j <= w; ++j) {
        omega(lo + i, lo + j) += ri * row[j];
      }
    }
  }
  omega.triangularView<Eigen::StrictlyLower>() =
      omega.triangularView<Eigen::StrictlyUpper>().transpose();
  return omega;
}
}  // namespace

Matrix band_matrix(const Matrix& m, int tau) {
  const int p = static_cast<int>(m.rows());
  if (tau < 0 || tau > p - 1) {
    throw std::invalid_argument("band_matrix: tau must be in [0, p-1]");
  }
  Matrix out = m;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (std::abs(i - j) > tau) out(i, j) = 0.0;
    }
  }
  return out;
}

PrecisionEstimate fit_banded_cholesky(const TwoSampleData& data, int tau, int pair_cap,
                                      std::uint64_t pair_seed) {
  data.validate();
  const int p = data.p();
  const int n1 = data.n1();
  const int n2 = data.n2();
  if (tau < 0 || tau > p - 1) {
    throw std::invalid_argument("fit_banded_cholesky: tau must be in [0, p-1]");
  }

  const long total_pairs = static_cast<long>(n1) * n2;
  const int used = static_cast<int>(std::min<long>(total_pairs, pair_cap));
  const double weight = std::sqrt(static_cast<double>(n1) / n2);

  Matrix y(used, p);
  if (used == total_pairs) {
    int r = 0;
    for (int k = 0; k < n1; ++k) {
      for (int l = 0; l < n2; ++l, ++r) {
        y.row(r) = data.x1.row(k) - weight * data.x2.row(l);
      }
    }
  } else {
    Rng rng(stream_key({pair_seed, static_cast<std::uint64_t>(total_pairs)}));
    const std::vector<int> picks =
        rng.sample_without_replacement(static_cast<int>(total_pairs), used);
    for (int r = 0; r < used; ++r) {
      const int k = picks[r] / n2;
      const int l = picks[r] % n2;
      y.row(r) = data.x1.row(k) - weight * data.x2.row(l);
    }
  }

  PrecisionEstimate est;
  est.tau = tau;
  est.kappa = data.kappa();
  est.a_hat = Matrix::Zero(p, p);
  est.d_hat.resize(p);

  std::vector<int> floored(p, 0);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < p; ++j) {
    const int w = std::min(tau, j);
    double rss;
    if (w == 0) {
      rss = y.col(j).squaredNorm();
    } else {
      const auto pred = y.middleCols(j - w, w);
      const Matrix gram = pred.transpose() * pred;
      const Vector c = pred.transpose() * y.col(j);
      const Vector a = solve_gram(gram, c);
      for (int i = 0; i < w; ++i) est.a_hat(j, j - w + i) = a[i];
      rss = (y.col(j) - pred * a).squaredNorm();
    }
    double d = rss / used;
    if (d < kResidFloor) {
      d = kResidFloor;
      floored[j] = 1;
    }
    est.d_hat[j] = d;
  }
  for (int v : floored) est.floored += v;

  est.omega_hat = assemble_precision(est.a_hat, est.d_hat, tau) / (1.0 - est.kappa);
  return est;
}

std::vector<CholeskyFactors> one_sample_cholesky_factors_multi(
    const Matrix& sample, std::span<const int> taus) {
  const int n = static_cast<int>(sample.rows());
  const int p = static_cast<int>(sample.cols());
  if (n < 2) throw std::invalid_argument("one-sample Cholesky fit: need at least two rows");
  int tau_max = 0;
  for (int t : taus) {
    if (t < 0 || t > p - 1) {
      throw std::invalid_argument("one-sample Cholesky fit: tau must be in [0, p-1]");
    }
    tau_max = std::max(tau_max, t);
  }

  Matrix y = sample.rowwise() - sample.colwise().mean();
  std::vector<CholeskyFactors> out(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    out[i].tau = taus[i];
    out[i].a_hat = Matrix::Zero(p, p);
    out[i].d_hat.resize(p);
  }

  // One Gram per coordinate at the widest window; narrower windows solve
  // against its trailing block.
  for (int j = 0; j < p; ++j) {
    const int wmax = std::min(tau_max, j);
    Matrix gram;
    Vector cvec;
    if (wmax > 0) {
      const auto pred = y.middleCols(j - wmax, wmax);
      gram = pred.transpose() * pred;
      cvec = pred.transpose() * y.col(j);
    }
    const double yy = y.col(j).squaredNorm();
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const int w = std::min(taus[i], j);
      double rss;
      if (w == 0) {
        rss = yy;
      } else {
        const Matrix g = gram.bottomRightCorner(w, w);
        const Vector c = cvec.tail(w);
        const Vector a = solve_gram(g, c);
        for (int q = 0; q < w; ++q) out[i].a_hat(j, j - w + q) = a[q];
        rss = yy - 2.0 * a.dot(c) + a.dot(g * a);
      }
      out[i].d_hat[j] = std::max(rss / (n - 1), kResidFloor);
    }
  }
  return out;
}

CholeskyFactors one_sample_cholesky_factors(const Matrix& sample, int tau) {
  const int taus[1] = {tau};
  return std::move(one_sample_cholesky_factors_multi(sample, taus).front());
}

Matrix cholesky_covariance_factor(const CholeskyFactors& f) {
  const int p = static_cast<int>(f.d_hat.size());
  Matrix l = Matrix::Zero(p, p);
  // Solve (I-A) L = sqrt(D) column by column; forward substitution only
  // touches rows at or below the column index.
  for (int j = 0; j < p; ++j) {
    l(j, j) = std::sqrt(f.d_hat[j]);
    for (int i = j + 1; i < p; ++i) {
      const int lo = std::max({0, i - f.tau, j});
      double acc = 0.0;
      for (int k = lo; k < i; ++k) acc += f.a_hat(i, k) * l(k, j);
      l(i, j) = acc;
    }
  }
  return l;
}

Matrix one_sample_covariance_via_cholesky(const Matrix& sample, int tau) {
  const Matrix l = cholesky_covariance_factor(one_sample_cholesky_factors(sample, tau));
  return l * l.transpose();
}

BandSelection select_band_width_detail(const Matrix& sample, std::span<const int> candidates,
                                       int n_splits, std::uint64_t seed) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_band_width: empty candidate list");
  }
  if (n_splits < 1) throw std::invalid_argument("select_band_width: need n_splits >= 1");
  const int rows = static_cast<int>(sample.rows());
  const int p = static_cast<int>(sample.cols());
  const int half = rows / 2;
  if (half < 2 || rows - half < 2) {
    throw std::invalid_argument("select_band_width: too few rows to split");
  }

  const int nc = static_cast<int>(candidates.size());
  Matrix risk = Matrix::Constant(n_splits, nc, std::numeric_limits<double>::quiet_NaN());

  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (int l = 0; l < n_splits; ++l) {
    try {
      Rng rng(stream_key({seed, static_cast<std::uint64_t>(l), 0x5b17ULL}));
      const std::vector<int> first = rng.sample_without_replacement(rows, half);
      std::vector<char> in_first(rows, 0);
      for (int idx : first) in_first[idx] = 1;

      Matrix s1(half, p), s2(rows - half, p);
      int r1 = 0, r2 = 0;
      for (int r = 0; r < rows; ++r) {
        if (in_first[r]) {
          s1.row(r1++) = sample.row(r);
        } else {
          s2.row(r2++) = sample.row(r);
        }
      }
      const Matrix centered2 = s2.rowwise() - s2.colwise().mean();
      const Matrix cov2 = centered2.transpose() * centered2 / (s2.rows() - 1);

      std::vector<int> usable;
      for (int c = 0; c < nc; ++c) {
        if (candidates[c] < half && candidates[c] <= p - 1) usable.push_back(candidates[c]);
      }
      const auto fits = one_sample_cholesky_factors_multi(s1, usable);
      for (std::size_t u = 0; u < usable.size(); ++u) {
        const Matrix fac = cholesky_covariance_factor(fits[u]);
        const Matrix sigma = fac * fac.transpose();
        const double dist = (sigma - cov2).norm();
        for (int c = 0; c < nc; ++c) {
          if (candidates[c] == usable[u]) risk(l, c) = dist;
        }
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) {
    throw std::runtime_error("band-width selection split failed: " + error);
  }

  BandSelection sel;
  sel.candidates.assign(candidates.begin(), candidates.end());
  sel.mean_risk.assign(nc, std::numeric_limits<double>::quiet_NaN());
  double best = std::numeric_limits<double>::infinity();
  int best_tau = -1;
  for (int c = 0; c < nc; ++c) {
    double sum = 0.0;
    int cnt = 0;
    for (int l = 0; l < n_splits; ++l) {
      if (std::isfinite(risk(l, c))) {
        sum += risk(l, c);
        ++cnt;
      }
    }
    if (cnt == 0) continue;  // candidate skipped on every split
    sel.mean_risk[c] = sum / cnt;
    if (sel.mean_risk[c] < best ||
        (sel.mean_risk[c] == best && candidates[c] < best_tau)) {
      best = sel.mean_risk[c];
      best_tau = candidates[c];
    }
  }
  if (best_tau < 0) {
    throw std::runtime_error("select_band_width: every candidate was skipped");
  }
  sel.tau = best_tau;
  return sel;
}

int select_band_width(const Matrix& sample, std::span<const int> candidates, int n_splits,
                      std::uint64_t seed) {
  return select_band_width_detail(sample, candidates, n_splits, seed).tau;
}

int select_band_width(const TwoSampleData& data, std::span<const int> candidates,
                      int n_splits, std::uint64_t seed) {
  Matrix pooled(data.n1() + data.n2(), data.p());
  pooled.topRows(data.n1()) = data.x1.rowwise() - data.x1.colwise().mean();
  pooled.bottomRows(data.n2()) = data.x2.rowwise() - data.x2.colwise().mean();
  return select_band_width(pooled, candidates, n_splits, seed);
}

std::vector<int> default_band_candidates(int rows, int p) {
  const int hi = std::min({20, rows / 2, p - 1});
  std::vector<int> out;
  for (int t = 0; t <= hi; ++t) out.push_back(t);
  return out;
}

double spectral_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("spectral_error: shape mismatch");
  }
  const Matrix diff = a - b;
  const int n = static_cast<int>(diff.cols());
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * i;  // deterministic, non-degenerate start
  v.normalize();

  double sigma = 0.0;
  for (int it = 0; it < 5000; ++it) {
    Vector u = diff * v;
    const double norm_u = u.norm();
    if (norm_u == 0.0) return 0.0;
    Vector w = diff.transpose() * (u / norm_u);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - sigma) <= 1e-6 * std::max(1.0, next)) return next;
    sigma = next;
  }
  return sigma;
}

}  // namespace hdmt
