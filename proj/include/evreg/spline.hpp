#pragma once

#include <Eigen/Core>

namespace evreg {

// Thin-plate basis function |x-y|^2 log|x-y|, extended by continuity to 0 at
// x = y.
double tps_psi(double x, double y);

// k knots at the marginal quantiles of `values` with equally spaced interior
// probabilities j/(k+1). Tied knots are separated by a deterministic jitter
// of 1e-9 times the data range so the knot sequence is strictly increasing.
Eigen::ArrayXd spline_knots(const Eigen::ArrayXd& values, int k);

// n x k matrix of raw (unstandardized) basis evaluations psi(x_i, knot_j).
Eigen::ArrayXXd spline_basis(const Eigen::ArrayXd& x, const Eigen::ArrayXd& knots);

// k x k roughness matrix S[j,l] = psi(knot_j, knot_l).
Eigen::ArrayXXd spline_penalty_matrix(const Eigen::ArrayXd& knots);

}  // namespace evreg
