#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace evreg {

// Per-column location/scale computed once on training cells and then applied
// verbatim everywhere, including prediction data.
struct ColumnStats {
  Eigen::ArrayXd mean;
  Eigen::ArrayXd sd;

  Eigen::Index cols() const { return mean.size(); }
};

// Mean and sample standard deviation (n-1 denominator) per column. A column
// with no spread cannot be standardized; the error names the offending
// feature, using `names` when provided and the column index otherwise.
ColumnStats column_stats(const Eigen::ArrayXXd& cols, const std::vector<std::string>& names = {});

Eigen::ArrayXXd apply_stats(const Eigen::ArrayXXd& cols, const ColumnStats& stats);

}  // namespace evreg
