#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hdmt/core_tests.hpp"
#include "hdmt/two_sample_data.hpp"

namespace hdmt {

/// Expression matrix with a 1/2 sample label per row and named feature
/// groups mapped to column indices (kept in column order, which is
/// assumed to follow genomic position).
struct GroupedDataset {
  Matrix expression;
  std::vector<int> sample_of_row;  // 1 or 2
  std::vector<std::string> feature_names;
  std::vector<std::pair<std::string, std::vector<int>>> groups;
  std::vector<std::string> warnings;
};

/// Loads expression (CSV with feature-name header, one row per subject),
/// labels (one 1/2 value per subject) and groups (one line per group:
/// id,feature,feature,...).  Unknown features raise an error naming the
/// group; duplicate features are dropped with a warning; groups below
/// min_group_size are skipped with a warning.
GroupedDataset load_dataset(const std::string& expression_path,
                            const std::string& labels_path,
                            const std::string& groups_path, int min_group_size = 20);

struct GroupReport {
  std::string group_id;
  double p_raw = 1.0;
  double bh_adjusted = 1.0;
  bool reject_at_fdr = false;
  Method method = Method::CQ;
  double statistic = 0.0;
};

struct PipelineOptions {
  Method method = Method::TransformedMulti;  // CQ, MultiThresh or TransformedMulti
  double alpha_fdr = 0.05;
  bool bootstrap = true;  // bootstrap p-values for the multi-level tests
  int bootstrap_b = 300;
  std::uint64_t seed = 20240601;
  bool standardize = true;  // divide columns by pooled within-sample sd
  double eta = 0.05;
  double eta_star = 0.05;
  int band = 30;
  int tau = -1;  // -1: per-group band-width selection
  int select_splits = 20;
  Variant variant = Variant::L2;
};

struct PipelineResult {
  std::vector<GroupReport> reports;  // ascending p_raw, ties by group id
  std::vector<std::string> errors;   // failed groups, excluded from the BH pass
};

/// Tests every group and applies the Benjamini-Hochberg step-up over the
/// successfully tested ones.
PipelineResult test_groups(const GroupedDataset& ds, const PipelineOptions& opts);

/// Step-up adjusted p-values (cumulative-min construction).
std::vector<double> bh_adjust(const std::vector<double>& pvalues);

/// Step-up rejection set at level alpha: reject the k smallest p-values
/// where k = max{ i : p_(i) <= i * alpha / m }.
std::vector<bool> bh_reject(const std::vector<double>& pvalues, double alpha);

void write_report_csv(const PipelineResult& result, std::ostream& os);
void write_report_json(const PipelineResult& result, std::ostream& os);

}  // namespace hdmt
