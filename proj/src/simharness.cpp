#include "hdmt/simharness.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "hdmt/bootstrap.hpp"
#include "hdmt/precision.hpp"
#include "hdmt/rng.hpp"
#include "hdmt/transform_tests.hpp"

namespace hdmt {

std::string innovation_name(Innovation inn) {
  return inn == Innovation::Gaussian ? "gaussian" : "gamma";
}

Innovation innovation_from_name(const std::string& name) {
  if (name == "gaussian" || name == "normal") return Innovation::Gaussian;
  if (name == "gamma") return Innovation::Gamma;
  throw std::invalid_argument("unknown innovation '" + name + "'");
}

double SimulationConfig::theta_hat() const {
  const double t = std::log(n_eff()) / std::log(static_cast<double>(p));
  return std::clamp(t, 0.1, 0.9);
}

std::uint64_t SimulationConfig::cell_id() const {
  // r is deliberately left out: cells along a signal-strength grid share
  // their noise and support streams, so the r = 0 row of a power sweep
  // reproduces the size run bit for bit.
  return stream_key({static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(n1),
                     static_cast<std::uint64_t>(n2), std::bit_cast<std::uint64_t>(beta),
                     std::bit_cast<std::uint64_t>(rho),
                     static_cast<std::uint64_t>(innovation)});
}

bool is_known_test(const std::string& id) {
  static const std::vector<std::string> known = {
      "cq", "bs", "oracle", "clx1", "clx2", "mult1", "mult2", "mult1_boot", "mult2_boot"};
  return std::find(known.begin(), known.end(), id) != known.end();
}

Matrix ar1_covariance(int p, double rho) {
  Matrix s(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) s(i, j) = std::pow(rho, std::abs(i - j));
  }
  return s;
}

Matrix ar1_cholesky_factor(int p, double rho) {
  Matrix l = Matrix::Zero(p, p);
  const double c = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < p; ++i) {
    l(i, 0) = std::pow(rho, i);
    for (int j = 1; j <= i; ++j) l(i, j) = std::pow(rho, i - j) * c;
  }
  return l;
}

Matrix ar1_precision(int p, double rho) {
  Matrix omega = Matrix::Zero(p, p);
  const double inv = 1.0 / (1.0 - rho * rho);
  for (int i = 0; i < p; ++i) {
    omega(i, i) = (i == 0 || i == p - 1) ? inv : (1.0 + rho * rho) * inv;
    if (i + 1 < p) {
      omega(i, i + 1) = -rho * inv;
      omega(i + 1, i) = -rho * inv;
    }
  }
  return omega;
}

namespace {

enum StreamId : std::uint64_t {
  kStreamSupport = 0,
  kStreamSample1 = 1,
  kStreamSample2 = 2,
  kStreamBandSelect = 3,
  kStreamBootstrap = 4,
};

int signal_count(const SimulationConfig& cfg) {
  int m = static_cast<int>(std::floor(std::pow(static_cast<double>(cfg.p), 1.0 - cfg.beta)));
  if (cfg.r > 0.0 && m == 0) m = 1;  // keep at least one planted coordinate
  return m;
}

void fill_sample(Matrix& x, const SimulationConfig& cfg, Rng& rng) {
  const int p = cfg.p;
  const double c = std::sqrt(1.0 - cfg.rho * cfg.rho);
  std::vector<double> z(p);
  for (Eigen::Index row = 0; row < x.rows(); ++row) {
    if (cfg.innovation == Innovation::Gaussian) {
      for (int k = 0; k < p; ++k) z[k] = rng.normal();
    } else {
      for (int k = 0; k < p; ++k) z[k] = rng.gamma4_standardized();
    }
    if (cfg.rho == 0.0) {
      for (int k = 0; k < p; ++k) x(row, k) = z[k];
    } else {
      // AR(1) recursion; identical in law to multiplying by the Cholesky
      // factor of the rho^|i-j| covariance.
      double prev = z[0];
      x(row, 0) = prev;
      for (int k = 1; k < p; ++k) {
        prev = cfg.rho * prev + c * z[k];
        x(row, k) = prev;
      }
    }
  }
}

}  // namespace

std::vector<int> signal_support(const SimulationConfig& cfg, int replicate) {
  const int m = signal_count(cfg);
  if (m == 0) return {};
  Rng rng(stream_key({cfg.seed, cfg.cell_id(), static_cast<std::uint64_t>(replicate),
                      kStreamSupport}));
  return rng.sample_without_replacement(cfg.p, m);
}

TwoSampleData gen_two_samples(const SimulationConfig& cfg, int replicate) {
  TwoSampleData data;
  data.x1.resize(cfg.n1, cfg.p);
  data.x2.resize(cfg.n2, cfg.p);
  const std::uint64_t cell = cfg.cell_id();

  Rng rng1(stream_key({cfg.seed, cell, static_cast<std::uint64_t>(replicate), kStreamSample1}));
  fill_sample(data.x1, cfg, rng1);
  Rng rng2(stream_key({cfg.seed, cell, static_cast<std::uint64_t>(replicate), kStreamSample2}));
  fill_sample(data.x2, cfg, rng2);

  const double delta = std::sqrt(2.0 * cfg.r * std::log(static_cast<double>(cfg.p)) /
                                 cfg.n_eff());
  if (delta != 0.0) {
    for (int k : signal_support(cfg, replicate)) data.x2.col(k).array() += delta;
  }
  return data;
}

namespace {

// Per-replicate evaluation: every test reduces to a level score u in
// [0, 1] with "reject at alpha" == "u <= alpha".  Scores are nominal
// p-values for the closed-form laws and the inverse critical-value level
// for bootstrap calibration.
std::vector<double> evaluate_replicate(const SimulationConfig& cfg, int replicate,
                                       const std::vector<std::string>& tests) {
  const TwoSampleData data = gen_two_samples(cfg, replicate);
  const std::uint64_t cell = cfg.cell_id();
  const int band = std::min(cfg.band, cfg.p - 1);

  auto wants = [&](const std::string& id) {
    return std::find(tests.begin(), tests.end(), id) != tests.end();
  };

  ComponentStats cs;
  if (wants("cq") || wants("bs") || wants("oracle") || wants("mult1") ||
      wants("mult1_boot")) {
    cs = component_stats(data, /*known_unit_variance=*/true);
  }

  PrecisionEstimate est;
  TransformedData td;
  const bool needs_omega = wants("mult2") || wants("clx2") || wants("mult2_boot");
  const bool needs_tau = needs_omega || wants("mult1_boot");
  int tau = cfg.tau;
  if (needs_tau && tau < 0) {
    const auto cands = default_band_candidates(cfg.n1 + cfg.n2, cfg.p);
    tau = select_band_width(data, cands, cfg.select_splits,
                            stream_key({cfg.seed, cell,
                                        static_cast<std::uint64_t>(replicate),
                                        kStreamBandSelect}));
  }
  if (needs_omega) {
    est = fit_banded_cholesky(data, tau);
    td = transform(data, est.omega_hat, est.tau, nullptr);
  }

  std::vector<double> u(tests.size(), 1.0);
  for (std::size_t t = 0; t < tests.size(); ++t) {
    const std::string& id = tests[t];
    if (id == "cq") {
      const double sd0 = std::sqrt(cq_null_variance_estimate(data, band));
      u[t] = normal_sf(cq_statistic(cs) / sd0);
    } else if (id == "bs") {
      const double sd0 = std::sqrt(cq_null_variance_estimate(data, band));
      u[t] = normal_sf(bs_statistic(cs) / sd0);
    } else if (id == "oracle") {
      const std::vector<int> support = signal_support(cfg, replicate);
      if (support.empty()) {
        throw std::runtime_error("oracle test: no planted coordinates at beta = " +
                                 format_double(cfg.beta));
      }
      const double sd0 = std::sqrt(restricted_null_variance_estimate(data, support, band));
      u[t] = normal_sf(oracle_statistic(cs, support) / sd0);
    } else if (id == "mult1") {
      const MultiThresholdResult m = multi_threshold_statistic(cs, cfg.eta, cfg.variant);
      u[t] = m.no_exceedance ? 1.0 : gumbel_upper_tail(m.value, cfg.p, cfg.eta);
    } else if (id == "mult2") {
      const MultiThresholdResult m =
          transformed_multi_threshold(td, cfg.theta_hat(), cfg.eta_star);
      u[t] = m.no_exceedance ? 1.0
                             : gumbel_upper_tail(m.value, cfg.p,
                                                 cfg.theta_hat() - cfg.eta_star);
    } else if (id == "clx1" || id == "clx2") {
      const ClxStatistics g = clx_statistics(data, id == "clx2" ? &est : nullptr);
      const double stat = id == "clx2" ? *g.g_omega : g.g_identity;
      u[t] = clx_upper_tail(stat - clx_center(cfg.p), cfg.p);
    } else if (id == "mult1_boot") {
      BootstrapOptions opts;
      opts.b = cfg.bootstrap_b;
      opts.tau = std::max(tau, 0);
      opts.eta = cfg.eta;
      opts.unit_variance = true;
      opts.variant = cfg.variant;
      const BootstrapNull bn = bootstrap_null(
          data, Method::MultiThresh, opts,
          stream_key({cfg.seed, cell, static_cast<std::uint64_t>(replicate),
                      kStreamBootstrap, 1}));
      u[t] = bootstrap_level_score(
          bn, multi_threshold_statistic(cs, cfg.eta, cfg.variant).value);
    } else if (id == "mult2_boot") {
      BootstrapOptions opts;
      opts.b = cfg.bootstrap_b;
      opts.tau = std::max(tau, 0);
      opts.theta = cfg.theta_hat();
      opts.eta_star = cfg.eta_star;
      const BootstrapNull bn = bootstrap_null(
          data, Method::TransformedMulti, opts,
          stream_key({cfg.seed, cell, static_cast<std::uint64_t>(replicate),
                      kStreamBootstrap, 2}));
      u[t] = bootstrap_level_score(
          bn, transformed_multi_threshold(td, cfg.theta_hat(), cfg.eta_star).value);
    } else {
      throw std::invalid_argument("unknown test id '" + id + "'");
    }
  }
  return u;
}

// Level scores for every replicate, row-major (replicate x test).
std::vector<double> evaluate_cell(const SimulationConfig& cfg,
                                  const std::vector<std::string>& tests) {
  const int r = cfg.replicates;
  const int t = static_cast<int>(tests.size());
  std::vector<double> scores(static_cast<std::size_t>(r) * t);
  std::string error;
  // Bootstrap tests parallelize internally; parallelizing both levels
  // would oversubscribe, and OpenMP's default nesting keeps the inner
  // loops serial inside this one.  Exceptions cannot cross the region,
  // so the first failure is carried out by hand.
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < r; ++rep) {
    try {
      const std::vector<double> u = evaluate_replicate(cfg, rep, tests);
      std::copy(u.begin(), u.end(), scores.begin() + static_cast<std::size_t>(rep) * t);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) {
    throw std::runtime_error("simulation cell failed: " + error);
  }
  return scores;
}

CellResult summarize(const SimulationConfig& cfg, const std::vector<std::string>& tests,
                     const std::vector<double>& scores,
                     const std::vector<double>& alpha_used, double wall) {
  CellResult out;
  out.config = cfg;
  out.tests = tests;
  out.alpha_used = alpha_used;
  out.wall_seconds = wall;
  const int t = static_cast<int>(tests.size());
  for (int j = 0; j < t; ++j) {
    int hits = 0;
    for (int rep = 0; rep < cfg.replicates; ++rep) {
      if (scores[static_cast<std::size_t>(rep) * t + j] <= alpha_used[j]) ++hits;
    }
    const double f = static_cast<double>(hits) / cfg.replicates;
    out.reject_rate.push_back(f);
    out.se.push_back(std::sqrt(f * (1.0 - f) / cfg.replicates));
  }
  if (cfg.r > 0.0 && static_cast<int>(std::floor(std::pow(cfg.p, 1.0 - cfg.beta))) == 0) {
    out.notes.push_back("signal count floored to 1");
  }
  return out;
}

void validate_config(const SimulationConfig& cfg) {
  if (cfg.p < 1 || cfg.n1 < 2 || cfg.n2 < 2) {
    throw std::invalid_argument("simulation config: need p >= 1 and n1, n2 >= 2");
  }
  if (cfg.replicates < 1) throw std::invalid_argument("simulation config: replicates >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw std::invalid_argument("simulation config: alpha must be in (0, 1]");
  }
  if (!(cfg.rho > -1.0 && cfg.rho < 1.0)) {
    throw std::invalid_argument("simulation config: rho must be in (-1, 1)");
  }
  if (cfg.tests.empty()) throw std::invalid_argument("simulation config: no tests selected");
  for (const auto& id : cfg.tests) {
    if (!is_known_test(id)) throw std::invalid_argument("unknown test id '" + id + "'");
  }
}

}  // namespace

CellResult run_size(const SimulationConfig& cfg) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> scores = evaluate_cell(cfg, cfg.tests);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summarize(cfg, cfg.tests, scores,
                   std::vector<double>(cfg.tests.size(), cfg.alpha), wall);
}

namespace {

// Monotone bisection for the nominal level whose empirical size matches
// the target; eight iterations on a log scale over [1e-6, 0.99] so badly
// miscalibrated asymptotic levels are still reachable in both directions.
double calibrate_level(const std::vector<double>& scores, int replicates, int stride,
                       int offset, double target, bool& bracketed) {
  auto size_at = [&](double a) {
    int hits = 0;
    for (int rep = 0; rep < replicates; ++rep) {
      if (scores[static_cast<std::size_t>(rep) * stride + offset] <= a) ++hits;
    }
    return static_cast<double>(hits) / replicates;
  };
  double lo = std::log(1e-6), hi = std::log(0.99);
  if (size_at(std::exp(hi)) < target || size_at(std::exp(lo)) > target) {
    bracketed = false;
    return target;
  }
  bracketed = true;
  for (int it = 0; it < 8; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (size_at(std::exp(mid)) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace

std::vector<CellResult> run_power(const std::vector<SimulationConfig>& grid,
                                  bool size_adjust) {
  if (grid.empty()) throw std::invalid_argument("run_power: empty grid");
  std::vector<CellResult> results;
  results.reserve(grid.size());

  // Calibrated levels per null data model, keyed by the r = 0 cell.
  std::map<std::uint64_t, std::vector<double>> calibrations;
  std::map<std::uint64_t, std::vector<std::string>> calibration_notes;

  for (const SimulationConfig& cfg : grid) {
    validate_config(cfg);
    const auto start = std::chrono::steady_clock::now();
    std::vector<double> alpha_used(cfg.tests.size(), cfg.alpha);
    std::vector<std::string> notes;

    if (size_adjust) {
      SimulationConfig null_cfg = cfg;
      null_cfg.r = 0.0;
      const std::uint64_t key =
          stream_key({null_cfg.cell_id(), null_cfg.seed,
                      static_cast<std::uint64_t>(null_cfg.replicates)});
      auto found = calibrations.find(key);
      if (found == calibrations.end()) {
        const std::vector<double> null_scores = evaluate_cell(null_cfg, cfg.tests);
        std::vector<double> levels(cfg.tests.size(), cfg.alpha);
        std::vector<std::string> cal_notes;
        for (std::size_t t = 0; t < cfg.tests.size(); ++t) {
          bool ok = false;
          levels[t] = calibrate_level(null_scores, null_cfg.replicates,
                                      static_cast<int>(cfg.tests.size()),
                                      static_cast<int>(t), cfg.alpha, ok);
          if (!ok) {
            cal_notes.push_back("calibration failed to bracket for " + cfg.tests[t] +
                                "; using nominal level");
          }
        }
        found = calibrations.emplace(key, std::move(levels)).first;
        calibration_notes.emplace(key, std::move(cal_notes));
      }
      alpha_used = found->second;
      notes = calibration_notes[key];
    }

    const std::vector<double> scores = evaluate_cell(cfg, cfg.tests);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CellResult cell = summarize(cfg, cfg.tests, scores, alpha_used, wall);
    cell.notes.insert(cell.notes.end(), notes.begin(), notes.end());
    results.push_back(std::move(cell));
  }
  return results;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void export_results_csv(const std::vector<CellResult>& results, std::ostream& os) {
  os << "p,n1,n2,beta,r,rho,innovation,alpha,test,reject_rate,se,replicates,seed\n";
  for (const CellResult& cell : results) {
    const SimulationConfig& c = cell.config;
    for (std::size_t t = 0; t < cell.tests.size(); ++t) {
      os << c.p << ',' << c.n1 << ',' << c.n2 << ',' << format_double(c.beta) << ','
         << format_double(c.r) << ',' << format_double(c.rho) << ','
         << innovation_name(c.innovation) << ',' << format_double(cell.alpha_used[t])
         << ',' << cell.tests[t] << ',' << format_double(cell.reject_rate[t]) << ','
         << format_double(cell.se[t]) << ',' << c.replicates << ',' << c.seed << '\n';
    }
  }
}

void export_results_json(const std::vector<CellResult>& results, std::ostream& os) {
  os << "[";
  bool first = true;
  for (const CellResult& cell : results) {
    const SimulationConfig& c = cell.config;
    for (std::size_t t = 0; t < cell.tests.size(); ++t) {
      if (!first) os << ",";
      first = false;
      os << "\n  {\"p\":" << c.p << ",\"n1\":" << c.n1 << ",\"n2\":" << c.n2
         << ",\"beta\":" << format_double(c.beta) << ",\"r\":" << format_double(c.r)
         << ",\"rho\":" << format_double(c.rho) << ",\"innovation\":\""
         << innovation_name(c.innovation) << "\",\"alpha\":"
         << format_double(cell.alpha_used[t]) << ",\"test\":\"" << cell.tests[t]
         << "\",\"reject_rate\":" << format_double(cell.reject_rate[t])
         << ",\"se\":" << format_double(cell.se[t]) << ",\"replicates\":" << c.replicates
         << ",\"seed\":" << c.seed << "}";
    }
  }
  os << "\n]\n";
}

}  // namespace hdmt
