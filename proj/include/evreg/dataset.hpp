#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "evreg/layout.hpp"

namespace evreg {

/// Gridded space-time regression table: one response value and one predictor
/// row per cell (time-major, then row-major in space), site coordinates in
/// degrees, and a mask marking cells with no usable response. Predictors must
/// be finite everywhere, including masked cells, so fitted surfaces extend
/// over the response gaps.
struct GridDataset {
  GridLayout layout;
  Eigen::ArrayXd lat;  // per site, degrees
  Eigen::ArrayXd lon;  // per site, degrees
  Eigen::ArrayXd y;    // per cell; NaN exactly where masked
  std::vector<bool> mask;
  Eigen::ArrayXXd X;   // n_cells x d
  std::vector<std::string> predictor_names;
  std::string response_units;

  long n_cells() const { return layout.n_cells(); }
  int n_predictors() const { return (int)predictor_names.size(); }

  /// n_sites x 2 (lat, lon), the shape the fold builder consumes.
  Eigen::ArrayXXd site_coords() const;

  /// Cells with mask false, ascending.
  std::vector<int> observed_cells() const;

  /// Column index of a predictor name; throws naming it when absent.
  int predictor_index(const std::string& name) const;

  /// Throws std::runtime_error naming the first violated field.
  void validate() const;
};

/// Reads the tab-separated table at `path` and its `<path>.meta` sidecar,
/// re-checks every shape and ordering invariant, and returns the dataset.
/// Errors name the offending column or row.
GridDataset load_dataset(const std::string& path);

/// Writes the table and sidecar atomically in canonical cell order with
/// round-trip number formatting, so save(load(f)) reproduces f byte for byte.
void save_dataset(const std::string& path, const GridDataset& d);

/// Content hash of the canonical serialization (table then sidecar).
std::string dataset_fingerprint(const GridDataset& d);

}  // namespace evreg
