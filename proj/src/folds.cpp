#include "evreg/folds.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evreg/rng.hpp"

namespace evreg {

namespace {
constexpr double kEarthRadiusMiles = 3958.8;
constexpr double kSpatialRangeMiles = 100.0;
constexpr double kTemporalRangeSteps = 5.0;
constexpr double kDiagInflation = 1e-8;

double deg2rad(double d) { return d * M_PI / 180.0; }
}  // namespace

double haversine_miles(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = deg2rad(lat1), p2 = deg2rad(lat2);
  const double dp = deg2rad(lat2 - lat1), dl = deg2rad(lon2 - lon1);
  const double a =
      std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusMiles * std::asin(std::min(1.0, std::sqrt(a)));
}

double gp_correlation(double miles, double dt_steps) {
  return std::exp(-miles / kSpatialRangeMiles) * std::exp(-std::abs(dt_steps) / kTemporalRangeSteps);
}

std::vector<int> FoldPlan::fold_cells(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (labels[i] == fold) out.push_back(cells[i]);
  return out;
}

std::vector<int> FoldPlan::complement_cells(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (labels[i] != fold) out.push_back(cells[i]);
  return out;
}

FoldPlan make_cv_folds(const Eigen::ArrayXXd& site_coords, const GridLayout& layout,
                       const std::vector<int>& cells, int k, std::uint64_t seed, int block_len) {
  if (k < 2) throw std::invalid_argument("make_cv_folds: need at least two folds");
  if (block_len < 1) throw std::invalid_argument("make_cv_folds: block length must be positive");
  if (site_coords.rows() != layout.n_sites() || site_coords.cols() != 2)
    throw std::invalid_argument("make_cv_folds: site_coords must be n_sites x 2");
  for (int c : cells)
    if (c < 0 || c >= layout.n_cells()) throw std::invalid_argument("make_cv_folds: cell outside layout");

  FoldPlan plan;
  plan.k = k;
  plan.cells = cells;
  plan.labels.assign(cells.size(), 0);

  const int n_blocks = (layout.n_times + block_len - 1) / block_len;
  for (int b = 0; b < n_blocks; ++b) {
    const int t_lo = b * block_len, t_hi = std::min(layout.n_times, t_lo + block_len);

    // Positions (within plan.cells) of this block's cells.
    std::vector<int> idx;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const int t = cells[i] / layout.n_sites();
      if (t >= t_lo && t < t_hi) idx.push_back(static_cast<int>(i));
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    if (n == 0) continue;

    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      const int ca = cells[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
      const int ta = ca / layout.n_sites(), sa = ca % layout.n_sites();
      for (Eigen::Index c = 0; c <= a; ++c) {
        const int cc = cells[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])];
        const int tc = cc / layout.n_sites(), sc = cc % layout.n_sites();
        const double miles = haversine_miles(site_coords(sa, 0), site_coords(sa, 1),
                                             site_coords(sc, 0), site_coords(sc, 1));
        const double rho = gp_correlation(miles, ta - tc);
        cov(a, c) = rho;
        cov(c, a) = rho;
      }
      cov(a, a) += kDiagInflation;
    }

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    Eigen::VectorXd eps(n);
    for (Eigen::Index a = 0; a < n; ++a) eps(a) = rng.normal();
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("make_cv_folds: covariance factorization failed");
    const Eigen::VectorXd z = llt.matrixL() * eps;

    // Rank-based quantile assignment: the r-th smallest realization lands in
    // fold floor(r*k/n) + 1, giving per-block fold sizes within one cell.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int c) { return z(a) < z(c); });
    for (Eigen::Index r = 0; r < n; ++r) {
      const int fold = static_cast<int>((static_cast<long>(r) * k) / n) + 1;
      plan.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])])] =
          std::min(fold, k);
    }
  }
  return plan;
}

}  // namespace evreg
