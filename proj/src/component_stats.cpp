#include "hdmt/two_sample_data.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hdmt {

void TwoSampleData::validate() const {
  if (x1.cols() != x2.cols()) {
    throw std::invalid_argument("TwoSampleData: column counts differ (" +
                                std::to_string(x1.cols()) + " vs " + std::to_string(x2.cols()) +
                                ")");
  }
  if (x1.cols() < 1) throw std::invalid_argument("TwoSampleData: p must be >= 1");
  if (x1.rows() < 2 || x2.rows() < 2) {
    throw std::invalid_argument("TwoSampleData: each sample needs at least two rows");
  }
  if (!x1.allFinite() || !x2.allFinite()) {
    throw std::invalid_argument("TwoSampleData: non-finite entry");
  }
}

ComponentStats component_stats(const TwoSampleData& data, bool known_unit_variance) {
  data.validate();
  const int p = data.p();
  const int n1 = data.n1();
  const int n2 = data.n2();

  ComponentStats cs;
  cs.t.resize(p);
  cs.m.resize(p);
  cs.scale.resize(p);
  cs.unit_variance = known_unit_variance;
  cs.n1 = n1;
  cs.n2 = n2;

  constexpr double kVarFloor = 1e-12;
  int degenerate = -1;

#pragma omp parallel for schedule(static)
  for (int k = 0; k < p; ++k) {
    double s1 = 0.0, q1 = 0.0;
    for (int i = 0; i < n1; ++i) {
      const double v = data.x1(i, k);
      s1 += v;
      q1 += v * v;
    }
    double s2 = 0.0, q2 = 0.0;
    for (int i = 0; i < n2; ++i) {
      const double v = data.x2(i, k);
      s2 += v;
      q2 += v * v;
    }
    // Sum over i != j of x_i x_j equals (sum)^2 - sum of squares.
    const double within1 = (s1 * s1 - q1) / (static_cast<double>(n1) * (n1 - 1));
    const double within2 = (s2 * s2 - q2) / (static_cast<double>(n2) * (n2 - 1));
    const double cross = 2.0 * s1 * s2 / (static_cast<double>(n1) * n2);
    cs.t[k] = within1 + within2 - cross;

    const double mean1 = s1 / n1;
    const double mean2 = s2 / n2;
    const double diff = mean1 - mean2;
    cs.m[k] = diff * diff;

    if (known_unit_variance) {
      cs.scale[k] = 1.0;
    } else {
      const double var1 = (q1 - n1 * mean1 * mean1) / (n1 - 1);
      const double var2 = (q2 - n2 * mean2 * mean2) / (n2 - 1);
      if (var1 < kVarFloor || var2 < kVarFloor) {
#pragma omp critical
        {
          if (degenerate < 0 || k < degenerate) degenerate = k;
        }
        cs.scale[k] = kVarFloor;
      } else {
        cs.scale[k] = var1 / n1 + var2 / n2;
      }
    }
  }

  if (degenerate >= 0) {
    throw std::invalid_argument("component_stats: degenerate coordinate " +
                                std::to_string(degenerate) +
                                " (sample variance below 1e-12)");
  }
  return cs;
}

}  // namespace hdmt
