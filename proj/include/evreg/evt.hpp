#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace evreg::evt {

// Log-density value used where the density is exactly zero, so callers see a
// finite number instead of -inf.
inline constexpr double kLogZero = -1e10;

struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

// Location/spread parameterisation: q_alpha is the alpha-quantile and s_beta
// the (1-beta/2, beta/2) inter-quantile range of the same law.
struct QuantileParams {
  double q_alpha = 0.0;
  double s_beta = 1.0;
  double xi = 0.1;
};

// Blend configuration. The lower component is the Gumbel law pinned to the
// heavy-tailed component at its p_a and p_b quantiles; the mixing weight is
// the Beta(c1,c2) cdf ramp between those two points. c1,c2 > 3 keeps the
// log-density continuous across the blend window.
struct BgevConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double p_a = 0.05;
  double p_b = 0.2;
  double c1 = 5.0;
  double c2 = 5.0;

  void validate() const;
};

struct GpdParams {
  double sigma = 1.0;
  double xi = 0.1;
};

enum class PpVariant { gev, bgev };

// Context for the point-process likelihood: n_y observations per period, so
// one period's exposure is (1/n_y) times the per-period intensity measure.
struct PpContext {
  double n_y = 1.0;
  PpVariant variant = PpVariant::bgev;
  BgevConfig blend{};
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Classic GEV in (mu, sigma, xi); xi == 0 is the Gumbel branch. cdf and
// quantile are totally defined on the support; outside the support the cdf
// saturates to 0/1 and logpdf returns kLogZero.
double gev_cdf(double z, const GevParams& p);
double gev_logpdf(double z, const GevParams& p);
double gev_quantile(double prob, const GevParams& p);

// Maps the quantile-spread parameterisation to classic GEV parameters.
GevParams reparam_to_classic(const QuantileParams& qp, double alpha, double beta);

// Precomputed pieces of a blended law for one (q_alpha, s_beta, xi).
struct BgevDerived {
  GevParams frechet;   // heavy-tailed component
  GevParams gumbel;    // lower component, pinned at (b1,p_a) and (b2,p_b)
  double b1 = 0.0;     // lower blend boundary = frechet quantile at p_a
  double b2 = 0.0;     // upper blend boundary = frechet quantile at p_b
};

BgevDerived bgev_derive(const QuantileParams& qp, const BgevConfig& cfg);

double bgev_cdf(double z, const QuantileParams& qp, const BgevConfig& cfg);
double bgev_logpdf(double z, const QuantileParams& qp, const BgevConfig& cfg);
// Inverts the cdf; closed form outside the blend window, bisection inside,
// converged so that bgev_cdf(result) matches prob to 1e-10.
double bgev_quantile(double prob, const QuantileParams& qp, const BgevConfig& cfg);

// Generalised Pareto with cdf 1 - (1 + xi z / sigma)^(-1/xi) for z >= 0.
double gpd_cdf(double z, const GpdParams& p);
double gpd_quantile(double prob, const GpdParams& p);

// Point-process negative log-likelihood over cells, summed:
//   sum_i (1/n_y) * (-log G(u_i)) - sum_{i: y_i > u_i} log(dlogG/dz at y_i)
// where G is the per-cell model cdf. The gev variant requires every y and u
// to lie inside the support and throws DomainError otherwise; the blended
// variant is finite everywhere.
double pp_nll(const Eigen::ArrayXd& y, const Eigen::ArrayXd& u, const Eigen::ArrayXd& q_alpha,
              const Eigen::ArrayXd& s_beta, double xi, const PpContext& ctx, double alpha = 0.5,
              double beta = 0.5);

}  // namespace evreg::evt
