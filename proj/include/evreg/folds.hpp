#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "evreg/layout.hpp"

namespace evreg {

// Great-Earth distance in miles between two points given in degrees.
double haversine_miles(double lat1, double lon1, double lat2, double lon2);

// Separable space-time correlation with ranges of 100 miles and 5 time
// steps: exp(-miles/100) * exp(-|dt|/5).
double gp_correlation(double miles, double dt_steps);

// Cross-validation assignment of cells to folds. `cells` lists the covered
// cells in layout order; `labels` aligns with it, values in 1..k.
struct FoldPlan {
  int k = 0;
  std::vector<int> cells;
  std::vector<int> labels;

  // Cells belonging to / excluded from one fold, in layout order.
  std::vector<int> fold_cells(int fold) const;
  std::vector<int> complement_cells(int fold) const;
};

// Builds space-time-clustered folds: the time axis is cut into consecutive
// blocks of `block_len` steps, and within each block a zero-mean
// unit-variance Gaussian field with the separable correlation above is
// simulated over the block's cells (dense Cholesky, 1e-8 diagonal inflation
// against duplicated points). A cell joins fold j when its realization
// ranks between the (j-1)/k and j/k empirical quantiles of its block, so
// every block spreads evenly (within one cell) across folds.
// `site_coords` is n_sites x 2, latitude then longitude in degrees, rows in
// layout site order.
FoldPlan make_cv_folds(const Eigen::ArrayXXd& site_coords, const GridLayout& layout,
                       const std::vector<int>& cells, int k, std::uint64_t seed,
                       int block_len = 9);

}  // namespace evreg
