#include "evreg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evreg {

double quantile_sorted(const Eigen::ArrayXd& sorted, double p) {
  const Eigen::Index n = sorted.size();
  if (n == 0) throw std::invalid_argument("quantile_sorted: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile_sorted: p outside [0,1]");
  if (n == 1) return sorted(0);
  const double h = static_cast<double>(n - 1) * p;
  const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo >= n - 1) return sorted(n - 1);
  const double w = h - static_cast<double>(lo);
  return sorted(lo) + w * (sorted(lo + 1) - sorted(lo));
}

Eigen::ArrayXd sorted_copy(const Eigen::ArrayXd& values) {
  Eigen::ArrayXd out = values;
  std::sort(out.data(), out.data() + out.size());
  return out;
}

double median(const Eigen::ArrayXd& values) { return quantile_sorted(sorted_copy(values), 0.5); }

double iqr(const Eigen::ArrayXd& values) {
  Eigen::ArrayXd s = sorted_copy(values);
  return quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
}

}  // namespace evreg
