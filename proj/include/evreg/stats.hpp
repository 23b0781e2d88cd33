#pragma once

#include <Eigen/Core>

namespace evreg {

// Linear-interpolation empirical quantile (the R type-7 convention) on an
// ascending-sorted array: h = (n-1)p, value = x[floor(h)] interpolated
// toward x[floor(h)+1].
double quantile_sorted(const Eigen::ArrayXd& sorted, double p);

Eigen::ArrayXd sorted_copy(const Eigen::ArrayXd& values);

double median(const Eigen::ArrayXd& values);

// Interquartile range, 0.75-quantile minus 0.25-quantile.
double iqr(const Eigen::ArrayXd& values);

}  // namespace evreg
