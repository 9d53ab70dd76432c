#include "hdmt/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace hdmt {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && !cell.empty();
}

}  // namespace

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    rows.push_back(split_line(t));
  }
  return rows;
}

NumericTable read_numeric_csv(const std::string& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw std::runtime_error("'" + path + "' is empty");

  NumericTable table;
  std::size_t first_data = 0;
  double probe;
  for (const std::string& cell : rows[0]) {
    if (!parse_double(cell, probe)) {
      table.header = rows[0];
      first_data = 1;
      break;
    }
  }
  const std::size_t cols = rows[first_data > 0 ? 0 : first_data].size();
  const std::size_t n = rows.size() - first_data;
  if (n == 0) throw std::runtime_error("'" + path + "' has a header but no data rows");
  table.values.resize(n, cols);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + first_data];
    if (row.size() != cols) {
      throw std::runtime_error("'" + path + "' row " + std::to_string(i + first_data + 1) +
                               ": expected " + std::to_string(cols) + " cells, got " +
                               std::to_string(row.size()));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      double v;
      if (!parse_double(row[j], v)) {
        throw std::runtime_error("'" + path + "' row " + std::to_string(i + first_data + 1) +
                                 " column " + std::to_string(j + 1) +
                                 ": non-numeric cell '" + row[j] + "'");
      }
      table.values(i, j) = v;
    }
  }
  return table;
}

}  // namespace hdmt
