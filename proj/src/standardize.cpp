#include "evreg/standardize.hpp"

#include <cmath>
#include <stdexcept>

namespace evreg {

ColumnStats column_stats(const Eigen::ArrayXXd& cols, const std::vector<std::string>& names) {
  const Eigen::Index n = cols.rows();
  if (n < 2) throw std::invalid_argument("column_stats: need at least 2 rows");
  ColumnStats st;
  st.mean.resize(cols.cols());
  st.sd.resize(cols.cols());
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    const double m = cols.col(j).mean();
    const double ss = (cols.col(j) - m).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      const std::string who = static_cast<std::size_t>(j) < names.size()
                                  ? names[static_cast<std::size_t>(j)]
                                  : "column " + std::to_string(j);
      throw std::invalid_argument("column_stats: feature '" + who + "' is constant");
    }
    st.mean(j) = m;
    st.sd(j) = sd;
  }
  return st;
}

Eigen::ArrayXXd apply_stats(const Eigen::ArrayXXd& cols, const ColumnStats& stats) {
  if (cols.cols() != stats.cols()) throw std::invalid_argument("apply_stats: column count mismatch");
  Eigen::ArrayXXd out(cols.rows(), cols.cols());
  for (Eigen::Index j = 0; j < cols.cols(); ++j) out.col(j) = (cols.col(j) - stats.mean(j)) / stats.sd(j);
  return out;
}

}  // namespace evreg
