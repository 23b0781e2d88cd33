#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "evreg/evt.hpp"

namespace evreg::metrics {

// One model's evaluation summary as reported in comparison tables.
struct ScorePanel {
  double training_loss = 0.0;
  double validation_loss = 0.0;
  double aic = 0.0;
  double smad_in = 0.0;
  double smad_out = 0.0;
  double twcrps = 0.0;
  std::optional<double> stls;
};

// Default threshold ladder for the weighted probability score: 24 values,
// geometric in the squared scale over [30, 1e5], then square-rooted, so
// v_1 = sqrt(30) and v_24 = sqrt(1e5).
Eigen::ArrayXd default_thresholds();

// Tail weight w(x) = w~(x)/w~(v_max) with w~(x) = 1 - (1 + (x+1)^2/1000)^(-1/4);
// w(v_max) = 1.
double threshold_weight(double x, double v_max);

// Threshold-weighted continuous ranked probability score, summed over cells
// and thresholds: sum_i sum_j w(v_j) * (1{y_i <= v_j} - phat(i,j))^2.
// `phat` holds predicted cdf values, one row per cell, one column per
// threshold; thresholds must increase and rows must be non-decreasing.
double twcrps(const Eigen::ArrayXd& y, const Eigen::ArrayXXd& phat, const Eigen::ArrayXd& v);

// Upper-tail grid size rule: the number of evaluation points is the expected
// count of observations above the p1-quantile.
int smad_default_m(long n, double p1 = 0.95);

// Standardised mean absolute deviance of exponential-margin data: mean
// absolute gap between the empirical quantiles of z and the exact standard
// exponential quantiles on the equally spaced grid
// p_j = p1 + (j-1)(1-p1)/m, whose last point is 1 minus the grid spacing.
// m < 2 is an error; m = -1 applies the default rule.
double smad(const Eigen::ArrayXd& z, double p1 = 0.95, int m = -1);

// Equally spaced evaluation probabilities for the tail survival score.
Eigen::ArrayXd stls_grid(double p_minus = 0.99, double p_plus = 0.9999, int n_grid = 200);

// Tail-weighted log-survival score: per cell, the squared gap between fitted
// and exact log-survival along the grid, integrated by trapezoid, plus a
// rectangle (1 - p_plus) * f(p_plus) covering the remaining tail so a
// constant offset delta scores exactly delta^2 * (1 - p_minus); averaged
// over cells. fhat(i, j) is the fitted cdf of cell i evaluated at the true
// quantile of grid(j); any fhat >= 1 is an error (log singularity).
double stls(const Eigen::ArrayXXd& fhat, const Eigen::ArrayXd& grid);

// Squared-difference integral between two curves after pinning both to 0 at
// x = 0: trapezoid over the grid of {[m(x)-m(0)] - [mhat(x)-mhat(0)]}^2.
double ise_centered(const std::function<double(double)>& m_true,
                    const std::function<double(double)>& m_est, const Eigen::ArrayXd& x);

// Mean of ise_centered over replicate estimates of the same true curve.
double mise_centered(const std::function<double(double)>& m_true,
                     const std::vector<std::function<double(double)>>& m_est,
                     const Eigen::ArrayXd& x);

// Evaluation abscissae: quantiles at probabilities j/(n+1), j = 1..n.
Eigen::ArrayXd equal_prob_grid(const std::function<double(double)>& quantile, int n = 5000);

// Standard-exponential probability integral transform -log(1 - c) of a cdf
// value c, clamped into [0, 1 - 1e-12].
double pit_exponential(double cdf_at_y);
Eigen::ArrayXd pit_exponential(const Eigen::ArrayXd& cdf_at_y);

// Per-observation fitted cdf when n_y observations share one period of the
// point-process model: the blended cdf raised to 1/n_y.
double fitted_cdf(double v, const evt::QuantileParams& qp, const evt::BgevConfig& cfg,
                  double n_y);

double aic(double nll, long k);

}  // namespace evreg::metrics
