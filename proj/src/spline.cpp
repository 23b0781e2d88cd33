#include "evreg/spline.hpp"

#include <cmath>
#include <stdexcept>

#include "evreg/stats.hpp"

namespace evreg {

double tps_psi(double x, double y) {
  const double r = std::abs(x - y);
  if (r == 0.0) return 0.0;
  return r * r * std::log(r);
}

Eigen::ArrayXd spline_knots(const Eigen::ArrayXd& values, int k) {
  if (k < 1) throw std::invalid_argument("spline_knots: k must be positive");
  if (values.size() < 2) throw std::invalid_argument("spline_knots: need at least 2 values");
  Eigen::ArrayXd s = sorted_copy(values);
  const double range = s(s.size() - 1) - s(0);
  if (!(range > 0.0)) throw std::invalid_argument("spline_knots: predictor is constant");
  Eigen::ArrayXd knots(k);
  for (int j = 1; j <= k; ++j) knots(j - 1) = quantile_sorted(s, static_cast<double>(j) / (k + 1));
  for (int j = 1; j < k; ++j)
    if (knots(j) <= knots(j - 1)) knots(j) = knots(j - 1) + 1e-9 * range;
  return knots;
}

Eigen::ArrayXXd spline_basis(const Eigen::ArrayXd& x, const Eigen::ArrayXd& knots) {
  Eigen::ArrayXXd out(x.size(), knots.size());
  for (Eigen::Index j = 0; j < knots.size(); ++j)
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i, j) = tps_psi(x(i), knots(j));
  return out;
}

Eigen::ArrayXXd spline_penalty_matrix(const Eigen::ArrayXd& knots) {
  Eigen::ArrayXXd S(knots.size(), knots.size());
  for (Eigen::Index j = 0; j < knots.size(); ++j)
    for (Eigen::Index l = 0; l < knots.size(); ++l) S(j, l) = tps_psi(knots(j), knots(l));
  return S;
}

}  // namespace evreg
