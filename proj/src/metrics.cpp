#include "evreg/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "evreg/stats.hpp"

namespace evreg::metrics {

namespace {

double raw_weight(double x) { return 1.0 - std::pow(1.0 + (x + 1.0) * (x + 1.0) / 1000.0, -0.25); }

// Trapezoid over an arbitrary increasing abscissa.
double trapz(const Eigen::ArrayXd& x, const Eigen::ArrayXd& f) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j + 1 < x.size(); ++j)
    acc += 0.5 * (f(j) + f(j + 1)) * (x(j + 1) - x(j));
  return acc;
}

}  // namespace

Eigen::ArrayXd default_thresholds() {
  const int n = 24;
  Eigen::ArrayXd v(n);
  const double lo = 30.0, hi = 1e5;
  for (int i = 0; i < n; ++i) v(i) = std::sqrt(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return v;
}

double threshold_weight(double x, double v_max) { return raw_weight(x) / raw_weight(v_max); }

double twcrps(const Eigen::ArrayXd& y, const Eigen::ArrayXXd& phat, const Eigen::ArrayXd& v) {
  if (phat.rows() != y.size() || phat.cols() != v.size())
    throw std::invalid_argument("twcrps: phat must be cells x thresholds");
  for (Eigen::Index j = 0; j + 1 < v.size(); ++j)
    if (!(v(j) < v(j + 1))) throw std::invalid_argument("twcrps: thresholds must increase");
  for (Eigen::Index i = 0; i < phat.rows(); ++i)
    for (Eigen::Index j = 0; j + 1 < phat.cols(); ++j)
      if (phat(i, j) > phat(i, j + 1) + 1e-12)
        throw std::invalid_argument("twcrps: predicted cdf decreases across thresholds");

  const double v_max = v(v.size() - 1);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double w = threshold_weight(v(j), v_max);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double ind = y(i) <= v(j) ? 1.0 : 0.0;
      const double d = ind - phat(i, j);
      acc += w * d * d;
    }
  }
  return acc;
}

int smad_default_m(long n, double p1) {
  return static_cast<int>(std::lround((1.0 - p1) * static_cast<double>(n)));
}

double smad(const Eigen::ArrayXd& z, double p1, int m) {
  if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("smad: p1 must lie in (0,1)");
  if (m < 0) m = smad_default_m(z.size(), p1);
  if (m < 2) throw std::invalid_argument("smad: grid needs at least two points");
  const Eigen::ArrayXd sorted = sorted_copy(z);
  const double h = (1.0 - p1) / m;
  double acc = 0.0;
  for (int j = 1; j <= m; ++j) {
    const double p = p1 + (j - 1) * h;
    acc += std::abs(quantile_sorted(sorted, p) - (-std::log1p(-p)));
  }
  return acc / m;
}

Eigen::ArrayXd stls_grid(double p_minus, double p_plus, int n_grid) {
  if (!(p_minus >= 0.0 && p_minus < p_plus && p_plus < 1.0))
    throw std::invalid_argument("stls_grid: need 0 <= p_minus < p_plus < 1");
  if (n_grid < 2) throw std::invalid_argument("stls_grid: need at least two points");
  Eigen::ArrayXd g(n_grid);
  for (int j = 0; j < n_grid; ++j) g(j) = p_minus + (p_plus - p_minus) * j / (n_grid - 1);
  return g;
}

double stls(const Eigen::ArrayXXd& fhat, const Eigen::ArrayXd& grid) {
  if (fhat.cols() != grid.size()) throw std::invalid_argument("stls: fhat must be cells x grid");
  if (fhat.rows() < 1) throw std::invalid_argument("stls: no cells");
  if ((fhat >= 1.0).any()) throw std::invalid_argument("stls: fitted cdf reaches 1 on the grid");
  const double p_plus = grid(grid.size() - 1);
  double acc = 0.0;
  Eigen::ArrayXd f(grid.size());
  for (Eigen::Index i = 0; i < fhat.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const double d = std::log1p(-fhat(i, j)) - std::log1p(-grid(j));
      f(j) = d * d;
    }
    acc += trapz(grid, f) + (1.0 - p_plus) * f(grid.size() - 1);
  }
  return acc / static_cast<double>(fhat.rows());
}

double ise_centered(const std::function<double(double)>& m_true,
                    const std::function<double(double)>& m_est, const Eigen::ArrayXd& x) {
  if (x.size() < 2) throw std::invalid_argument("ise_centered: need at least two grid points");
  const double t0 = m_true(0.0), e0 = m_est(0.0);
  Eigen::ArrayXd f(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double d = (m_true(x(j)) - t0) - (m_est(x(j)) - e0);
    f(j) = d * d;
  }
  return trapz(x, f);
}

double mise_centered(const std::function<double(double)>& m_true,
                     const std::vector<std::function<double(double)>>& m_est,
                     const Eigen::ArrayXd& x) {
  if (m_est.empty()) throw std::invalid_argument("mise_centered: no replicate estimates");
  double acc = 0.0;
  for (const auto& fn : m_est) acc += ise_centered(m_true, fn, x);
  return acc / static_cast<double>(m_est.size());
}

Eigen::ArrayXd equal_prob_grid(const std::function<double(double)>& quantile, int n) {
  if (n < 1) throw std::invalid_argument("equal_prob_grid: need at least one point");
  Eigen::ArrayXd g(n);
  for (int j = 1; j <= n; ++j) g(j - 1) = quantile(static_cast<double>(j) / (n + 1));
  return g;
}

double pit_exponential(double cdf_at_y) {
  const double c = std::min(std::max(cdf_at_y, 0.0), 1.0 - 1e-12);
  return -std::log1p(-c);
}

Eigen::ArrayXd pit_exponential(const Eigen::ArrayXd& cdf_at_y) {
  Eigen::ArrayXd out(cdf_at_y.size());
  for (Eigen::Index i = 0; i < cdf_at_y.size(); ++i) out(i) = pit_exponential(cdf_at_y(i));
  return out;
}

double fitted_cdf(double v, const evt::QuantileParams& qp, const evt::BgevConfig& cfg,
                  double n_y) {
  if (!(n_y > 0.0)) throw std::invalid_argument("fitted_cdf: n_y must be positive");
  return std::pow(evt::bgev_cdf(v, qp, cfg), 1.0 / n_y);
}

double aic(double nll, long k) { return 2.0 * static_cast<double>(k) + 2.0 * nll; }

}  // namespace evreg::metrics
