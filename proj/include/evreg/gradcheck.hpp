#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace evreg {

struct GradCheckEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  bool pass = true;
  double max_rel_err = 0.0;
  int checked = 0;
  int excluded = 0;
  std::vector<GradCheckEntry> failures;
};

// Compares analytic gradients against central differences, entry by entry.
// The step scales with the coordinate, h * (1 + |x|), and relative error
// uses max(1, |analytic|, |numeric|) as the denominator. An entry over
// tolerance is excluded rather than failed when the one-sided second
// difference accounts for the discrepancy (within a factor of four): that
// signature means a kink sat between the probe points, which biases the
// central difference without implicating the adjoint. A wrong adjoint
// leaves a discrepancy the second difference cannot explain, so it still
// fails.
GradCheckReport grad_check(const std::function<double(const std::vector<Eigen::ArrayXXd>&)>& f,
                           std::vector<Eigen::ArrayXXd> params,
                           const std::vector<Eigen::ArrayXXd>& analytic, double h = 1e-5,
                           double tol = 1e-6);

}  // namespace evreg
