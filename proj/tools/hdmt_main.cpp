#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdmt/bootstrap.hpp"
#include "hdmt/csv_io.hpp"
#include "hdmt/pipeline.hpp"
#include "hdmt/precision.hpp"
#include "hdmt/rng.hpp"
#include "hdmt/simharness.hpp"
#include "hdmt/stats_math.hpp"
#include "hdmt/transform_tests.hpp"

namespace {

using hdmt::SimulationConfig;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HarnessSpec {
  SimulationConfig base;
  std::vector<double> r_grid;     // empty: just base.r
  std::vector<double> beta_grid;  // empty: just base.beta
  bool size_adjust = true;
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double lo, hi, step;
    char c1, c2;
    std::istringstream in(text);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0) {
      throw UsageError("bad grid '" + text + "' (want lo:hi:step)");
    }
    for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(v);
    return out;
  }
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    if (!cell.empty()) out.push_back(std::stod(cell));
  }
  if (out.empty()) throw UsageError("bad grid '" + text + "'");
  return out;
}

std::vector<std::string> parse_test_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    if (cell.empty()) continue;
    if (!hdmt::is_known_test(cell)) throw UsageError("unknown test id '" + cell + "'");
    out.push_back(cell);
  }
  if (out.empty()) throw UsageError("empty test list");
  return out;
}

void apply_key(HarnessSpec& spec, const std::string& key, const std::string& value) {
  SimulationConfig& c = spec.base;
  try {
    if (key == "p") c.p = std::stoi(value);
    else if (key == "n1") c.n1 = std::stoi(value);
    else if (key == "n2") c.n2 = std::stoi(value);
    else if (key == "beta") c.beta = std::stod(value);
    else if (key == "r") c.r = std::stod(value);
    else if (key == "rho") c.rho = std::stod(value);
    else if (key == "innovation") c.innovation = hdmt::innovation_from_name(value);
    else if (key == "alpha") c.alpha = std::stod(value);
    else if (key == "replicates") c.replicates = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "tests") c.tests = parse_test_list(value);
    else if (key == "size_adjust") spec.size_adjust = (value == "1" || value == "true");
    else if (key == "bootstrap_b") c.bootstrap_b = std::stoi(value);
    else if (key == "band") c.band = std::stoi(value);
    else if (key == "eta") c.eta = std::stod(value);
    else if (key == "eta_star") c.eta_star = std::stod(value);
    else if (key == "tau") c.tau = std::stoi(value);
    else if (key == "select_splits") c.select_splits = std::stoi(value);
    else if (key == "variant")
      c.variant = (value == "l1" || value == "L1") ? hdmt::Variant::L1 : hdmt::Variant::L2;
    else if (key == "r_grid") spec.r_grid = parse_grid(value);
    else if (key == "beta_grid") spec.beta_grid = parse_grid(value);
    else throw UsageError("unknown config key '" + key + "'");
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("bad value '" + value + "' for config key '" + key + "'");
  }
}

void load_config_file(HarnessSpec& spec, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it) {
      std::string v;
      if (it.value().is_string()) {
        v = it.value().get<std::string>();
      } else if (it.value().is_boolean()) {
        v = it.value().get<bool>() ? "true" : "false";
      } else if (it.value().is_array()) {
        std::string joined;
        for (const auto& el : it.value()) {
          if (!joined.empty()) joined += ",";
          joined += el.is_string() ? el.get<std::string>() : el.dump();
        }
        v = joined;
      } else {
        v = it.value().dump();
      }
      apply_key(spec, it.key(), v);
    }
    return;
  }

  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (!key.empty()) apply_key(spec, key, value);
  }
}

void apply_preset(HarnessSpec& spec, const std::string& name) {
  SimulationConfig& c = spec.base;
  if (name == "table1-desk" || name == "table1-full") {
    c.p = 200;
    c.n1 = 30;
    c.n2 = 40;
    c.beta = 0.5;
    c.r = 0.0;
    c.rho = 0.6;
    c.alpha = 0.05;
    c.replicates = name == "table1-desk" ? 200 : 1000;
    c.tests = {"oracle", "cq", "clx1", "clx2", "mult1", "mult2", "mult1_boot", "mult2_boot"};
    spec.size_adjust = false;
  } else if (name == "fig1-desk") {
    c.p = 200;
    c.n1 = 30;
    c.n2 = 40;
    c.rho = 0.6;
    c.alpha = 0.05;
    c.replicates = 200;
    c.tests = {"oracle", "cq", "clx1", "clx2", "mult1", "mult2"};
    spec.r_grid = parse_grid("0.1:0.4:0.05");
    spec.beta_grid = {0.5, 0.6};
    spec.size_adjust = true;
  } else {
    throw UsageError("unknown preset '" + name + "'");
  }
}

std::vector<SimulationConfig> build_grid(const HarnessSpec& spec) {
  std::vector<double> betas = spec.beta_grid.empty()
                                  ? std::vector<double>{spec.base.beta}
                                  : spec.beta_grid;
  std::vector<double> rs = spec.r_grid.empty() ? std::vector<double>{spec.base.r}
                                               : spec.r_grid;
  std::vector<SimulationConfig> grid;
  for (double b : betas) {
    for (double r : rs) {
      SimulationConfig c = spec.base;
      c.beta = b;
      c.r = r;
      grid.push_back(c);
    }
  }
  return grid;
}

void write_output(const std::string& path, const std::string& payload) {
  if (path.empty() || path == "-") {
    std::cout << payload;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << payload;
}

std::string render_results(const std::vector<hdmt::CellResult>& results,
                           const std::string& format) {
  std::ostringstream os;
  if (format == "json") {
    hdmt::export_results_json(results, os);
  } else {
    hdmt::export_results_csv(results, os);
  }
  return os.str();
}

void print_outcome(const hdmt::TestOutcome& out) {
  std::cout << "method: " << hdmt::method_name(out.method) << "\n";
  std::cout << "statistic: " << hdmt::format_double(out.statistic) << "\n";
  std::cout << "standardized: " << hdmt::format_double(out.standardized) << "\n";
  std::cout << "critical_value: " << hdmt::format_double(out.critical_value) << "\n";
  std::cout << "alpha: " << hdmt::format_double(out.alpha) << "\n";
  if (out.pvalue) std::cout << "pvalue: " << hdmt::format_double(*out.pvalue) << "\n";
  const char* source = "gaussian";
  if (out.source == hdmt::CriticalSource::Gumbel) source = "gumbel";
  if (out.source == hdmt::CriticalSource::ExtremeValue) source = "extreme-value";
  if (out.source == hdmt::CriticalSource::Bootstrap) source = "bootstrap";
  std::cout << "source: " << source << "\n";
  std::cout << "decision: " << (out.reject ? "reject" : "accept") << "\n";
}

int run_test_command(const std::string& method, const std::string& x1_path,
                     const std::string& x2_path, double alpha, bool unit_variance,
                     int band, double eta, double eta_star, double s_level, int tau,
                     int bootstrap_b, std::uint64_t seed) {
  hdmt::TwoSampleData data;
  data.x1 = hdmt::read_numeric_csv(x1_path).values;
  data.x2 = hdmt::read_numeric_csv(x2_path).values;
  data.validate();
  const int p = data.p();
  const int band_eff = std::min(band, p - 1);

  if (method == "cq" || method == "bs" || method == "single" || method == "mult1") {
    const hdmt::ComponentStats cs = hdmt::component_stats(data, unit_variance);
    if (method == "cq") {
      print_outcome(hdmt::cq_test(cs, data, alpha, band_eff));
    } else if (method == "bs") {
      print_outcome(hdmt::bs_test(cs, data, alpha, band_eff));
    } else if (method == "single") {
      const double L =
          hdmt::threshold_statistic(cs, {s_level, eta, hdmt::Variant::L2});
      print_outcome(hdmt::single_level_test(L, hdmt::null_moments(s_level, p), alpha));
    } else if (bootstrap_b > 0) {
      hdmt::BootstrapOptions opts;
      opts.b = bootstrap_b;
      opts.tau = std::max(tau, 0);
      opts.eta = eta;
      opts.unit_variance = unit_variance;
      const auto bn = hdmt::bootstrap_null(data, hdmt::Method::MultiThresh, opts, seed);
      print_outcome(
          hdmt::multi_threshold_test_bootstrap(cs, eta, hdmt::Variant::L2, alpha, bn));
    } else {
      print_outcome(hdmt::multi_threshold_test(cs, eta, hdmt::Variant::L2, alpha));
    }
    return 0;
  }

  if (method == "mult2" || method == "clx1" || method == "clx2") {
    int tau_eff = tau;
    if (method != "clx1" && tau_eff < 0) {
      const auto cands = hdmt::default_band_candidates(data.n1() + data.n2(), p);
      tau_eff = hdmt::select_band_width(data, cands, 20, hdmt::stream_key({seed, 0x7aULL}));
      std::cerr << "selected band width tau = " << tau_eff << "\n";
    }
    if (method == "clx1") {
      const auto g = hdmt::clx_statistics(data, nullptr);
      print_outcome(hdmt::clx_test(g.g_identity, p, alpha, false));
      return 0;
    }
    const hdmt::PrecisionEstimate est = hdmt::fit_banded_cholesky(data, tau_eff);
    if (method == "clx2") {
      const auto g = hdmt::clx_statistics(data, &est);
      print_outcome(hdmt::clx_test(*g.g_omega, p, alpha, true));
      return 0;
    }
    const hdmt::TransformedData td =
        hdmt::transform(data, est.omega_hat, est.tau, nullptr);
    const double theta =
        std::clamp(std::log(data.n_eff()) / std::log(static_cast<double>(p)), 0.1, 0.9);
    if (bootstrap_b > 0) {
      hdmt::BootstrapOptions opts;
      opts.b = bootstrap_b;
      opts.tau = std::max(tau_eff, 0);
      opts.theta = theta;
      opts.eta_star = eta_star;
      const auto bn =
          hdmt::bootstrap_null(data, hdmt::Method::TransformedMulti, opts, seed);
      print_outcome(hdmt::transformed_test_bootstrap(td, theta, eta_star, alpha, bn));
    } else {
      print_outcome(hdmt::transformed_test(td, theta, eta_star, alpha));
    }
    return 0;
  }

  throw UsageError("unknown method '" + method + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High dimensional two-sample mean tests: thresholding statistics, "
               "precision-matrix transformation, Monte Carlo harness and grouped "
               "testing with FDR control"};
  app.require_subcommand(1);
  app.fallthrough();
  argv = app.ensure_utf8(argv);

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = OpenMP default)")
      ->capture_default_str();

  // simulate-size / simulate-power
  HarnessSpec spec;
  std::string config_path, preset, output = "-", format = "csv";
  std::vector<std::string> overrides;
  std::string r_grid_text, beta_grid_text, tests_text;
  bool no_size_adjust = false;

  auto add_sim_options = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON or key=value config file");
    sub->add_option("--preset", preset, "table1-desk, table1-full or fig1-desk");
    sub->add_option("--set", overrides, "Override config key=value (repeatable)");
    sub->add_option("--p", spec.base.p, "Dimension")->capture_default_str();
    sub->add_option("--n1", spec.base.n1, "Sample one size")->capture_default_str();
    sub->add_option("--n2", spec.base.n2, "Sample two size")->capture_default_str();
    sub->add_option("--beta", spec.base.beta, "Sparsity")->capture_default_str();
    sub->add_option("--r", spec.base.r, "Signal strength")->capture_default_str();
    sub->add_option("--rho", spec.base.rho, "AR(1) parameter")->capture_default_str();
    sub->add_option("--innovation", spec.base.innovation,
                    "gaussian or gamma")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, hdmt::Innovation>{
                {"gaussian", hdmt::Innovation::Gaussian},
                {"gamma", hdmt::Innovation::Gamma}},
            CLI::ignore_case));
    sub->add_option("--alpha", spec.base.alpha, "Nominal level")->capture_default_str();
    sub->add_option("--replicates", spec.base.replicates, "Monte Carlo replicates")
        ->capture_default_str();
    sub->add_option("--seed", spec.base.seed, "RNG seed")->capture_default_str();
    sub->add_option("--tests", tests_text, "Comma list of test ids");
    sub->add_option("--bootstrap-b", spec.base.bootstrap_b, "Bootstrap copies")
        ->capture_default_str();
    sub->add_option("--tau", spec.base.tau, "Band width (-1 = select per replicate)")
        ->capture_default_str();
    sub->add_option("--band", spec.base.band, "Variance-estimator band")
        ->capture_default_str();
    sub->add_option("--output", output, "Output path (- = stdout)")->capture_default_str();
    sub->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
  };

  CLI::App* size_cmd =
      app.add_subcommand("simulate-size", "Rejection rates under the null");
  add_sim_options(size_cmd);

  CLI::App* power_cmd =
      app.add_subcommand("simulate-power", "Power over a grid in r and beta");
  add_sim_options(power_cmd);
  power_cmd->add_option("--r-grid", r_grid_text, "Signal grid lo:hi:step or comma list");
  power_cmd->add_option("--beta-grid", beta_grid_text, "Sparsity grid");
  power_cmd->add_flag("--no-size-adjust", no_size_adjust,
                      "Skip the empirical size calibration pass");

  // test
  std::string method = "cq", x1_path, x2_path;
  double alpha = 0.05, eta = 0.05, eta_star = 0.05, s_level = 0.5;
  bool unit_variance = false;
  int band = 30, tau = -1, bootstrap_b = 0;
  std::uint64_t seed = 20240601;
  CLI::App* test_cmd = app.add_subcommand("test", "Run one test on two CSV matrices");
  test_cmd->add_option("--method", method,
                       "cq, bs, oracle-free methods: single, mult1, mult2, clx1, clx2")
      ->check(CLI::IsMember({"cq", "bs", "single", "mult1", "mult2", "clx1", "clx2"}))
      ->capture_default_str();
  test_cmd->add_option("--x1", x1_path, "Sample one CSV")->required();
  test_cmd->add_option("--x2", x2_path, "Sample two CSV")->required();
  test_cmd->add_option("--alpha", alpha, "Level")->capture_default_str();
  test_cmd->add_flag("--unit-variance", unit_variance,
                     "Treat variances as known and equal to one");
  test_cmd->add_option("--band", band, "Variance-estimator band")->capture_default_str();
  test_cmd->add_option("--eta", eta, "Grid upper exclusion")->capture_default_str();
  test_cmd->add_option("--eta-star", eta_star, "Transformed window upper exclusion")
      ->capture_default_str();
  test_cmd->add_option("--s", s_level, "Level for the single-level test")
      ->capture_default_str();
  test_cmd->add_option("--tau", tau, "Band width (-1 = select)")->capture_default_str();
  test_cmd->add_option("--bootstrap", bootstrap_b,
                       "Bootstrap copies for multi-level critical values (0 = closed form)")
      ->capture_default_str();
  test_cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();

  // geneset
  std::string expr_path, labels_path, groups_path, gs_method = "mult2";
  double fdr = 0.05;
  int min_group = 20, gs_bootstrap = 300, gs_tau = -1;
  bool gumbel = false, no_standardize = false;
  std::uint64_t gs_seed = 20240601;
  std::string gs_output = "-", gs_format = "csv";
  CLI::App* geneset_cmd =
      app.add_subcommand("geneset", "Grouped testing with BH FDR control");
  geneset_cmd->add_option("--expression", expr_path, "Expression CSV (header row)")
      ->required();
  geneset_cmd->add_option("--labels", labels_path, "Sample labels (1/2 per row)")
      ->required();
  geneset_cmd->add_option("--groups", groups_path, "Groups CSV: id,feature,...")
      ->required();
  geneset_cmd->add_option("--method", gs_method, "cq, mult1 or mult2")
      ->check(CLI::IsMember({"cq", "mult1", "mult2"}))
      ->capture_default_str();
  geneset_cmd->add_option("--fdr", fdr, "False discovery rate")->capture_default_str();
  geneset_cmd->add_option("--bootstrap-b", gs_bootstrap, "Bootstrap copies")
      ->capture_default_str();
  geneset_cmd->add_flag("--gumbel", gumbel, "Closed-form p-values instead of bootstrap");
  geneset_cmd->add_option("--min-group", min_group, "Minimum features per group")
      ->capture_default_str();
  geneset_cmd->add_flag("--no-standardize", no_standardize,
                        "Skip per-coordinate standardization");
  geneset_cmd->add_option("--tau", gs_tau, "Band width (-1 = select per group)")
      ->capture_default_str();
  geneset_cmd->add_option("--seed", gs_seed, "RNG seed")->capture_default_str();
  geneset_cmd->add_option("--output", gs_output, "Report path (- = stdout)")
      ->capture_default_str();
  geneset_cmd->add_option("--format", gs_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  // boundary
  std::string beta_text = "0.51:0.99:0.01";
  double theta_val = -1.0;
  std::string b_output = "-";
  CLI::App* boundary_cmd =
      app.add_subcommand("boundary", "Tabulate the detection boundary curves");
  boundary_cmd->add_option("--beta", beta_text, "Grid lo:hi:step or comma list")
      ->capture_default_str();
  boundary_cmd->add_option("--theta", theta_val,
                           "Dimension-growth index for the transformed curve");
  boundary_cmd->add_option("--output", b_output, "Output path (- = stdout)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion") {
      return app.exit(e);
    }
    std::cerr << e.what() << "\n";
    return 1;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*size_cmd || *power_cmd) {
      CLI::App* active = *size_cmd ? size_cmd : power_cmd;
      HarnessSpec merged;
      if (!preset.empty()) apply_preset(merged, preset);
      if (!config_path.empty()) load_config_file(merged, config_path);
      for (const std::string& kv : overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("bad --set '" + kv + "'");
        apply_key(merged, kv.substr(0, eq), kv.substr(eq + 1));
      }
      // Direct flags win over preset/config when explicitly given.
      const std::array<const char*, 12> direct = {"--p",    "--n1",         "--n2",
                                                  "--beta", "--r",          "--rho",
                                                  "--alpha", "--replicates", "--seed",
                                                  "--bootstrap-b", "--tau", "--band"};
      for (const char* name : direct) {
        if (active->count(name) == 0) continue;
        std::string flat(name + 2);
        std::replace(flat.begin(), flat.end(), '-', '_');
        apply_key(merged, flat, active->get_option(name)->as<std::string>());
      }
      if (active->count("--innovation") > 0) merged.base.innovation = spec.base.innovation;
      if (!tests_text.empty()) merged.base.tests = parse_test_list(tests_text);
      if (!r_grid_text.empty()) merged.r_grid = parse_grid(r_grid_text);
      if (!beta_grid_text.empty()) merged.beta_grid = parse_grid(beta_grid_text);
      if (no_size_adjust) merged.size_adjust = false;

      std::vector<hdmt::CellResult> results;
      if (*size_cmd) {
        results.push_back(hdmt::run_size(merged.base));
      } else {
        results = hdmt::run_power(build_grid(merged), merged.size_adjust);
      }
      for (const auto& cell : results) {
        for (const auto& note : cell.notes) std::cerr << "note: " << note << "\n";
        std::cerr << "cell beta=" << cell.config.beta << " r=" << cell.config.r << " done in "
                  << cell.wall_seconds << "s\n";
      }
      write_output(output, render_results(results, format));
      return 0;
    }

    if (*test_cmd) {
      return run_test_command(method, x1_path, x2_path, alpha, unit_variance, band, eta,
                              eta_star, s_level, tau, bootstrap_b, seed);
    }

    if (*geneset_cmd) {
      const hdmt::GroupedDataset ds =
          hdmt::load_dataset(expr_path, labels_path, groups_path, min_group);
      for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
      hdmt::PipelineOptions opts;
      opts.method = gs_method == "cq"      ? hdmt::Method::CQ
                    : gs_method == "mult1" ? hdmt::Method::MultiThresh
                                           : hdmt::Method::TransformedMulti;
      opts.alpha_fdr = fdr;
      opts.bootstrap = !gumbel;
      opts.bootstrap_b = gs_bootstrap;
      opts.seed = gs_seed;
      opts.standardize = !no_standardize;
      opts.tau = gs_tau;
      const hdmt::PipelineResult result = hdmt::test_groups(ds, opts);
      for (const auto& err : result.errors) std::cerr << "error: " << err << "\n";
      std::ostringstream os;
      if (gs_format == "json") {
        hdmt::write_report_json(result, os);
      } else {
        hdmt::write_report_csv(result, os);
      }
      write_output(gs_output, os.str());
      return 0;
    }

    if (*boundary_cmd) {
      const std::vector<double> betas = parse_grid(beta_text);
      std::ostringstream os;
      const bool with_theta = theta_val > 0.0;
      os << (with_theta ? "beta,rho,rho_theta\n" : "beta,rho\n");
      for (double b : betas) {
        hdmt::DetectionPoint pt;
        pt.beta = b;
        if (with_theta) pt.theta = theta_val;
        try {
          const hdmt::BoundaryValue v = hdmt::detection_boundary(pt);
          os << hdmt::format_double(b) << ',' << hdmt::format_double(v.rho);
          if (with_theta) os << ',' << hdmt::format_double(*v.rho_theta);
          os << '\n';
        } catch (const std::invalid_argument&) {
          std::cerr << "skipping beta=" << b << " outside (1/2, 1)\n";
        }
      }
      write_output(b_output, os.str());
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
