#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hdmt/core_tests.hpp"
#include "hdmt/two_sample_data.hpp"

namespace hdmt {

enum class Innovation { Gaussian, Gamma };

std::string innovation_name(Innovation inn);
Innovation innovation_from_name(const std::string& name);

/// One Monte Carlo cell: data model, decision rules to evaluate and
/// replication plan.  Data generation depends only on
/// (p, n1, n2, beta, r, rho, innovation, seed), so cells sharing those
/// share replicate streams bit for bit.
struct SimulationConfig {
  int p = 200;
  int n1 = 30;
  int n2 = 40;
  double beta = 0.5;  // signal count is floor(p^(1-beta))
  double r = 0.0;     // signal strength; entries are sqrt(2 r log p / n)
  double rho = 0.6;   // AR(1) parameter of the common covariance
  Innovation innovation = Innovation::Gaussian;
  double alpha = 0.05;
  int replicates = 1000;
  std::uint64_t seed = 20240601;
  std::vector<std::string> tests = {"oracle", "cq", "clx1", "clx2", "mult1", "mult2"};
  bool size_adjust = false;
  int bootstrap_b = 300;

  // Calibration knobs (defaults follow the library conventions).
  int band = 30;          // capped at p-1 when applied
  double eta = 0.05;
  double eta_star = 0.05;
  int tau = -1;           // -1: select per replicate by split risk
  int select_splits = 20;
  Variant variant = Variant::L2;

  double n_eff() const { return static_cast<double>(n1) * n2 / (n1 + n2); }
  /// theta from p = n^(1/theta), clamped to [0.1, 0.9].
  double theta_hat() const;
  /// Stream key of the data model (excludes alpha, tests, replicates).
  std::uint64_t cell_id() const;
};

struct CellResult {
  SimulationConfig config;
  std::vector<std::string> tests;
  std::vector<double> reject_rate;
  std::vector<double> se;          // sqrt(f (1-f) / replicates)
  std::vector<double> alpha_used;  // nominal, or calibrated under size adjustment
  double wall_seconds = 0.0;
  std::vector<std::string> notes;
};

/// Known test identifiers: cq, bs, oracle, clx1, clx2, mult1, mult2,
/// mult1_boot, mult2_boot.
bool is_known_test(const std::string& id);

Matrix ar1_covariance(int p, double rho);
Matrix ar1_cholesky_factor(int p, double rho);
Matrix ar1_precision(int p, double rho);

/// Planted signal coordinate set for one replicate (sorted).
std::vector<int> signal_support(const SimulationConfig& cfg, int replicate);

/// X = Sigma^{1/2} Z + mu with AR(1) Sigma and the configured innovation;
/// mu1 = 0 and mu2 carries the planted signals.
TwoSampleData gen_two_samples(const SimulationConfig& cfg, int replicate);

/// Rejection frequency of every configured test at the nominal level.
CellResult run_size(const SimulationConfig& cfg);

/// Power over a grid of cells.  With size_adjust each test's nominal
/// level is first calibrated on the matching r = 0 cell so its empirical
/// size hits cfg.alpha (monotone bisection, 8 iterations); calibrations
/// are cached across cells sharing a null data model.
std::vector<CellResult> run_power(const std::vector<SimulationConfig>& grid,
                                  bool size_adjust);

void export_results_csv(const std::vector<CellResult>& results, std::ostream& os);
void export_results_json(const std::vector<CellResult>& results, std::ostream& os);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace hdmt
