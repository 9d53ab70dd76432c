#pragma once

#include <string>
#include <vector>

#include "hdmt/two_sample_data.hpp"

namespace hdmt {

struct NumericTable {
  std::vector<std::string> header;  // empty when the file carries none
  Matrix values;
};

/// Comma-separated numeric table.  A first line that does not parse as
/// numbers is taken as the header.  Parse failures report path, row and
/// column.
NumericTable read_numeric_csv(const std::string& path);

/// Raw comma-split rows (no numeric interpretation); blank lines skipped.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path);

}  // namespace hdmt
