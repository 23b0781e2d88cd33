#pragma once

namespace evreg {

// Space-time cell layout. Cells are ordered time-major, then row-major over
// the spatial grid: cell = t * (d1*d2) + r * d2 + c. Ungridded data uses
// d2 = 1 with d1 = number of sites.
struct GridLayout {
  int d1 = 1;
  int d2 = 1;
  int n_times = 1;

  int n_sites() const { return d1 * d2; }
  long n_cells() const { return static_cast<long>(n_sites()) * n_times; }
  int cell(int t, int r, int c) const { return t * n_sites() + r * d2 + c; }
};

}  // namespace evreg
