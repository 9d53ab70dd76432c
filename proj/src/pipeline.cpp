#include "hdmt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "hdmt/bootstrap.hpp"
#include "hdmt/csv_io.hpp"
#include "hdmt/precision.hpp"
#include "hdmt/rng.hpp"
#include "hdmt/simharness.hpp"
#include "hdmt/transform_tests.hpp"

namespace hdmt {

namespace {

std::uint64_t hash_id(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

GroupedDataset load_dataset(const std::string& expression_path,
                            const std::string& labels_path, const std::string& groups_path,
                            int min_group_size) {
  GroupedDataset ds;

  const NumericTable expr = read_numeric_csv(expression_path);
  if (expr.header.empty()) {
    throw std::runtime_error("'" + expression_path + "': expression file needs a header row");
  }
  ds.expression = expr.values;
  ds.feature_names = expr.header;

  std::map<std::string, int> column_of;
  for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
    column_of[ds.feature_names[j]] = static_cast<int>(j);
  }

  const auto label_rows = read_csv_rows(labels_path);
  for (const auto& row : label_rows) {
    if (row.size() == 1 && (row[0] == "label" || row[0] == "sample")) continue;
    for (const auto& cell : row) {
      if (cell == "1") {
        ds.sample_of_row.push_back(1);
      } else if (cell == "2") {
        ds.sample_of_row.push_back(2);
      } else {
        throw std::runtime_error("'" + labels_path + "': label '" + cell +
                                 "' is neither 1 nor 2");
      }
    }
  }
  if (static_cast<Eigen::Index>(ds.sample_of_row.size()) != ds.expression.rows()) {
    throw std::runtime_error("'" + labels_path + "': " +
                             std::to_string(ds.sample_of_row.size()) + " labels for " +
                             std::to_string(ds.expression.rows()) + " expression rows");
  }
  const int c1 = static_cast<int>(std::count(ds.sample_of_row.begin(),
                                             ds.sample_of_row.end(), 1));
  const int c2 = static_cast<int>(ds.sample_of_row.size()) - c1;
  if (c1 < 2 || c2 < 2) {
    throw std::runtime_error("each sample needs at least two subjects (got " +
                             std::to_string(c1) + " and " + std::to_string(c2) + ")");
  }

  for (const auto& row : read_csv_rows(groups_path)) {
    const std::string id = row[0];
    std::vector<int> cols;
    bool duplicate = false;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j].empty()) continue;
      const auto it = column_of.find(row[j]);
      if (it == column_of.end()) {
        throw std::runtime_error("group '" + id + "': unknown feature '" + row[j] + "'");
      }
      if (std::find(cols.begin(), cols.end(), it->second) != cols.end()) {
        duplicate = true;
        continue;
      }
      cols.push_back(it->second);
    }
    if (duplicate) {
      ds.warnings.push_back("group '" + id + "': duplicate features dropped");
    }
    if (static_cast<int>(cols.size()) < min_group_size) {
      ds.warnings.push_back("group '" + id + "' skipped: " + std::to_string(cols.size()) +
                            " features < minimum " + std::to_string(min_group_size));
      continue;
    }
    std::sort(cols.begin(), cols.end());  // column order stands in for position
    ds.groups.emplace_back(id, std::move(cols));
  }
  return ds;
}

namespace {

TwoSampleData slice_group(const GroupedDataset& ds, const std::vector<int>& cols,
                          bool standardize) {
  const int c1 = static_cast<int>(std::count(ds.sample_of_row.begin(),
                                             ds.sample_of_row.end(), 1));
  const int c2 = static_cast<int>(ds.sample_of_row.size()) - c1;
  TwoSampleData data;
  data.x1.resize(c1, cols.size());
  data.x2.resize(c2, cols.size());
  int r1 = 0, r2 = 0;
  for (std::size_t r = 0; r < ds.sample_of_row.size(); ++r) {
    auto& dst = ds.sample_of_row[r] == 1 ? data.x1 : data.x2;
    int& idx = ds.sample_of_row[r] == 1 ? r1 : r2;
    for (std::size_t j = 0; j < cols.size(); ++j) dst(idx, j) = ds.expression(r, cols[j]);
    ++idx;
  }
  if (standardize) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double m1 = data.x1.col(j).mean();
      const double m2 = data.x2.col(j).mean();
      const double ss = (data.x1.col(j).array() - m1).square().sum() +
                        (data.x2.col(j).array() - m2).square().sum();
      const double sd = std::sqrt(ss / (c1 + c2 - 2));
      if (sd > 1e-12) {
        data.x1.col(j) /= sd;
        data.x2.col(j) /= sd;
      }
    }
  }
  return data;
}

double group_pvalue(const TwoSampleData& data, const PipelineOptions& opts,
                    std::uint64_t group_seed, double& statistic) {
  const int p = data.p();
  const int band = std::min(opts.band, p - 1);

  if (opts.method == Method::CQ) {
    const ComponentStats cs = component_stats(data, /*known_unit_variance=*/false);
    const double sd0 = std::sqrt(cq_null_variance_estimate(data, band));
    statistic = cq_statistic(cs);
    return normal_sf(statistic / sd0);
  }

  if (opts.method == Method::MultiThresh) {
    const ComponentStats cs = component_stats(data, /*known_unit_variance=*/false);
    const MultiThresholdResult m = multi_threshold_statistic(cs, opts.eta, opts.variant);
    statistic = m.value;
    if (m.no_exceedance) return 1.0;
    if (!opts.bootstrap) return gumbel_upper_tail(m.value, p, opts.eta);
    BootstrapOptions bopts;
    bopts.b = opts.bootstrap_b;
    bopts.tau = std::max(opts.tau, 0);
    bopts.eta = opts.eta;
    bopts.unit_variance = false;
    bopts.variant = opts.variant;
    const BootstrapNull bn = bootstrap_null(data, Method::MultiThresh, bopts, group_seed);
    return bootstrap_pvalue(bn, m.value);
  }

  if (opts.method != Method::TransformedMulti) {
    throw std::invalid_argument("pipeline: method must be cq, mult1 or mult2");
  }

  int tau = opts.tau;
  if (tau < 0) {
    const auto cands = default_band_candidates(data.n1() + data.n2(), p);
    tau = select_band_width(data, cands, opts.select_splits,
                            stream_key({group_seed, 0x7aULL}));
  }
  const PrecisionEstimate est = fit_banded_cholesky(data, tau);
  const TransformedData td = transform(data, est.omega_hat, est.tau, nullptr);
  const double theta =
      std::clamp(std::log(data.n_eff()) / std::log(static_cast<double>(p)), 0.1, 0.9);
  const MultiThresholdResult m = transformed_multi_threshold(td, theta, opts.eta_star);
  statistic = m.value;
  if (m.no_exceedance) return 1.0;
  if (!opts.bootstrap) return gumbel_upper_tail(m.value, p, theta - opts.eta_star);
  BootstrapOptions bopts;
  bopts.b = opts.bootstrap_b;
  bopts.tau = tau;
  bopts.theta = theta;
  bopts.eta_star = opts.eta_star;
  const BootstrapNull bn = bootstrap_null(data, Method::TransformedMulti, bopts, group_seed);
  return bootstrap_pvalue(bn, m.value);
}

}  // namespace

std::vector<double> bh_adjust(const std::vector<double>& pvalues) {
  const std::size_t m = pvalues.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::vector<double> adjusted(m, 1.0);
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    const double scaled = pvalues[order[i]] * m / (i + 1);
    running = std::min(running, scaled);
    adjusted[order[i]] = std::min(running, 1.0);
  }
  return adjusted;
}

std::vector<bool> bh_reject(const std::vector<double>& pvalues, double alpha) {
  const std::size_t m = pvalues.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::size_t cutoff = 0;  // number of rejections
  for (std::size_t i = 0; i < m; ++i) {
    if (pvalues[order[i]] <= alpha * (i + 1) / m) cutoff = i + 1;
  }
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < cutoff; ++i) reject[order[i]] = true;
  return reject;
}

PipelineResult test_groups(const GroupedDataset& ds, const PipelineOptions& opts) {
  PipelineResult result;
  const int n_groups = static_cast<int>(ds.groups.size());
  std::vector<double> pvals(n_groups, 1.0);
  std::vector<double> stats(n_groups, 0.0);
  std::vector<std::string> errors(n_groups);

#pragma omp parallel for schedule(dynamic)
  for (int g = 0; g < n_groups; ++g) {
    try {
      const TwoSampleData data = slice_group(ds, ds.groups[g].second, opts.standardize);
      const std::uint64_t group_seed = stream_key({opts.seed, hash_id(ds.groups[g].first)});
      pvals[g] = group_pvalue(data, opts, group_seed, stats[g]);
    } catch (const std::exception& e) {
      errors[g] = e.what();
    }
  }

  std::vector<int> tested;
  for (int g = 0; g < n_groups; ++g) {
    if (errors[g].empty()) {
      tested.push_back(g);
    } else {
      result.errors.push_back("group '" + ds.groups[g].first + "': " + errors[g]);
    }
  }

  std::vector<double> tested_p;
  tested_p.reserve(tested.size());
  for (int g : tested) tested_p.push_back(pvals[g]);
  const std::vector<double> adjusted = bh_adjust(tested_p);
  const std::vector<bool> rejected = bh_reject(tested_p, opts.alpha_fdr);

  for (std::size_t i = 0; i < tested.size(); ++i) {
    GroupReport rep;
    rep.group_id = ds.groups[tested[i]].first;
    rep.p_raw = tested_p[i];
    rep.bh_adjusted = adjusted[i];
    rep.reject_at_fdr = rejected[i];
    rep.method = opts.method;
    rep.statistic = stats[tested[i]];
    result.reports.push_back(std::move(rep));
  }
  std::sort(result.reports.begin(), result.reports.end(),
            [](const GroupReport& a, const GroupReport& b) {
              if (a.p_raw != b.p_raw) return a.p_raw < b.p_raw;
              return a.group_id < b.group_id;
            });
  return result;
}

void write_report_csv(const PipelineResult& result, std::ostream& os) {
  os << "group,p_raw,bh_adjusted,reject_at_fdr,method,statistic\n";
  for (const GroupReport& r : result.reports) {
    os << r.group_id << ',' << format_double(r.p_raw) << ',' << format_double(r.bh_adjusted)
       << ',' << (r.reject_at_fdr ? 1 : 0) << ',' << method_name(r.method) << ','
       << format_double(r.statistic) << '\n';
  }
}

void write_report_json(const PipelineResult& result, std::ostream& os) {
  os << "[";
  bool first = true;
  for (const GroupReport& r : result.reports) {
    if (!first) os << ",";
    first = false;
    os << "\n  {\"group\":\"" << r.group_id << "\",\"p_raw\":" << format_double(r.p_raw)
       << ",\"bh_adjusted\":" << format_double(r.bh_adjusted) << ",\"reject_at_fdr\":"
       << (r.reject_at_fdr ? "true" : "false") << ",\"method\":\"" << method_name(r.method)
       << "\",\"statistic\":" << format_double(r.statistic) << "}";
  }
  os << "\n]\n";
}

}  // namespace hdmt
