#include "evreg/evt.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "evreg/special.hpp"

namespace evreg::evt {

namespace {

// Treat |xi| below this as the Gumbel branch; the power-law expressions lose
// all precision long before this point.
constexpr double kXiZero = 1e-12;

double log_neg_log(double p) { return std::log(-std::log(p)); }

void check_prob(double p, const char* who) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument(std::string(who) + ": probability must lie in (0,1)");
}

}  // namespace

void BgevConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("BgevConfig: alpha must lie in (0,1)");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("BgevConfig: beta must lie in (0,1)");
  if (!(p_a > 0.0 && p_b < 1.0 && p_a < p_b))
    throw std::invalid_argument("BgevConfig: need 0 < p_a < p_b < 1 (a degenerate blend window is rejected)");
  if (!(c1 > 3.0 && c2 > 3.0))
    throw std::invalid_argument("BgevConfig: c1 and c2 must exceed 3 to keep the log-density continuous");
}

double gev_cdf(double z, const GevParams& p) {
  if (!(p.sigma > 0.0)) throw std::invalid_argument("gev_cdf: sigma must be positive");
  const double w = (z - p.mu) / p.sigma;
  if (std::fabs(p.xi) < kXiZero) return std::exp(-std::exp(-w));
  const double t = 1.0 + p.xi * w;
  if (t <= 0.0) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(t, -1.0 / p.xi));
}

double gev_logpdf(double z, const GevParams& p) {
  if (!(p.sigma > 0.0)) throw std::invalid_argument("gev_logpdf: sigma must be positive");
  const double w = (z - p.mu) / p.sigma;
  if (std::fabs(p.xi) < kXiZero) return -w - std::exp(-w) - std::log(p.sigma);
  const double t = 1.0 + p.xi * w;
  if (t <= 0.0) return kLogZero;
  return -(1.0 / p.xi + 1.0) * std::log(t) - std::pow(t, -1.0 / p.xi) - std::log(p.sigma);
}

double gev_quantile(double prob, const GevParams& p) {
  check_prob(prob, "gev_quantile");
  if (!(p.sigma > 0.0)) throw std::invalid_argument("gev_quantile: sigma must be positive");
  if (std::fabs(p.xi) < kXiZero) return p.mu - p.sigma * std::log(-std::log(prob));
  return p.mu + p.sigma * (std::pow(-std::log(prob), -p.xi) - 1.0) / p.xi;
}

GevParams reparam_to_classic(const QuantileParams& qp, double alpha, double beta) {
  check_prob(alpha, "reparam_to_classic");
  check_prob(beta, "reparam_to_classic");
  if (!(qp.s_beta > 0.0)) throw std::invalid_argument("reparam_to_classic: s_beta must be positive");
  GevParams out;
  out.xi = qp.xi;
  if (std::fabs(qp.xi) < kXiZero) {
    // Gumbel branch: solve the alpha-quantile and spread conditions directly.
    const double denom = log_neg_log(beta / 2.0) - log_neg_log(1.0 - beta / 2.0);
    out.sigma = qp.s_beta / denom;
    out.mu = qp.q_alpha + qp.s_beta * log_neg_log(alpha) / denom;
    out.xi = 0.0;
    return out;
  }
  const auto ell = [&](double x) { return std::pow(-std::log(x), -qp.xi); };
  const double denom = ell(1.0 - beta / 2.0) - ell(beta / 2.0);
  out.sigma = qp.xi * qp.s_beta / denom;
  out.mu = qp.q_alpha - qp.s_beta * (ell(alpha) - 1.0) / denom;
  return out;
}

BgevDerived bgev_derive(const QuantileParams& qp, const BgevConfig& cfg) {
  cfg.validate();
  if (!(qp.xi > 0.0)) throw std::invalid_argument("bgev_derive: the blended family requires xi > 0");
  BgevDerived d;
  d.frechet = reparam_to_classic(qp, cfg.alpha, cfg.beta);
  d.b1 = gev_quantile(cfg.p_a, d.frechet);
  d.b2 = gev_quantile(cfg.p_b, d.frechet);
  // Two-point pinning: the Gumbel component passes through (b1, p_a) and
  // (b2, p_b), expressed through its own quantile-spread parameters.
  const double la = log_neg_log(cfg.alpha);
  const double lpa = log_neg_log(cfg.p_a);
  const double lpb = log_neg_log(cfg.p_b);
  const double width = d.b2 - d.b1;
  QuantileParams gq;
  gq.q_alpha = d.b1 - width * (la - lpa) / (lpa - lpb);
  gq.s_beta = width * (log_neg_log(cfg.beta / 2.0) - log_neg_log(1.0 - cfg.beta / 2.0)) / (lpa - lpb);
  gq.xi = 0.0;
  d.gumbel = reparam_to_classic(gq, cfg.alpha, cfg.beta);
  return d;
}

namespace {

double gumbel_logcdf(double z, const GevParams& g) { return -std::exp(-(z - g.mu) / g.sigma); }

double frechet_logcdf(double z, const GevParams& f) {
  const double t = 1.0 + f.xi * (z - f.mu) / f.sigma;
  if (t <= 0.0) return -std::numeric_limits<double>::infinity();
  return -std::pow(t, -1.0 / f.xi);
}

double bgev_logcdf_impl(double z, const BgevDerived& d, const BgevConfig& cfg) {
  if (z <= d.b1) return gumbel_logcdf(z, d.gumbel);
  if (z >= d.b2) return frechet_logcdf(z, d.frechet);
  const double w = (z - d.b1) / (d.b2 - d.b1);
  const double p = ibeta_reg(w, cfg.c1, cfg.c2);
  return (1.0 - p) * gumbel_logcdf(z, d.gumbel) + p * frechet_logcdf(z, d.frechet);
}

// d/dz of the log cdf; defined everywhere the law places mass.
double bgev_dlogcdf_impl(double z, const BgevDerived& d, const BgevConfig& cfg) {
  if (z <= d.b1) return std::exp(-(z - d.gumbel.mu) / d.gumbel.sigma) / d.gumbel.sigma;
  const double t = 1.0 + d.frechet.xi * (z - d.frechet.mu) / d.frechet.sigma;
  const double dlog_f = std::pow(t, -1.0 / d.frechet.xi - 1.0) / d.frechet.sigma;
  if (z >= d.b2) return dlog_f;
  const double w = (z - d.b1) / (d.b2 - d.b1);
  const double p = ibeta_reg(w, cfg.c1, cfg.c2);
  const double dp = beta_pdf(w, cfg.c1, cfg.c2) / (d.b2 - d.b1);
  const double dlog_g = std::exp(-(z - d.gumbel.mu) / d.gumbel.sigma) / d.gumbel.sigma;
  return (1.0 - p) * dlog_g + p * dlog_f + dp * (frechet_logcdf(z, d.frechet) - gumbel_logcdf(z, d.gumbel));
}

}  // namespace

double bgev_cdf(double z, const QuantileParams& qp, const BgevConfig& cfg) {
  const BgevDerived d = bgev_derive(qp, cfg);
  return std::exp(bgev_logcdf_impl(z, d, cfg));
}

double bgev_logpdf(double z, const QuantileParams& qp, const BgevConfig& cfg) {
  const BgevDerived d = bgev_derive(qp, cfg);
  const double slope = bgev_dlogcdf_impl(z, d, cfg);
  if (!(slope > 0.0)) return kLogZero;
  return bgev_logcdf_impl(z, d, cfg) + std::log(slope);
}

double bgev_quantile(double prob, const QuantileParams& qp, const BgevConfig& cfg) {
  check_prob(prob, "bgev_quantile");
  const BgevDerived d = bgev_derive(qp, cfg);
  // The pinning makes the cdf hit exactly p_a at b1 and p_b at b2, so the
  // closed forms cover everything outside the blend window.
  if (prob <= cfg.p_a) return gev_quantile(prob, d.gumbel);
  if (prob >= cfg.p_b) return gev_quantile(prob, d.frechet);
  double lo = d.b1, hi = d.b2;
  const double target = std::log(prob);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (bgev_logcdf_impl(mid, d, cfg) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double gpd_cdf(double z, const GpdParams& p) {
  if (!(p.sigma > 0.0)) throw std::invalid_argument("gpd_cdf: sigma must be positive");
  if (z <= 0.0) return 0.0;
  if (std::fabs(p.xi) < kXiZero) return -std::expm1(-z / p.sigma);
  const double t = 1.0 + p.xi * z / p.sigma;
  if (t <= 0.0) return 1.0;  // above the upper endpoint when xi < 0
  return 1.0 - std::pow(t, -1.0 / p.xi);
}

double gpd_quantile(double prob, const GpdParams& p) {
  if (!(prob >= 0.0 && prob < 1.0)) throw std::invalid_argument("gpd_quantile: probability must lie in [0,1)");
  if (!(p.sigma > 0.0)) throw std::invalid_argument("gpd_quantile: sigma must be positive");
  if (std::fabs(p.xi) < kXiZero) return -p.sigma * std::log1p(-prob);
  return p.sigma / p.xi * (std::pow(1.0 - prob, -p.xi) - 1.0);
}

double pp_nll(const Eigen::ArrayXd& y, const Eigen::ArrayXd& u, const Eigen::ArrayXd& q_alpha,
              const Eigen::ArrayXd& s_beta, double xi, const PpContext& ctx, double alpha, double beta) {
  const auto n = y.size();
  if (u.size() != n || q_alpha.size() != n || s_beta.size() != n)
    throw std::invalid_argument("pp_nll: input arrays must share one length");
  if (!(ctx.n_y > 0.0)) throw std::invalid_argument("pp_nll: n_y must be positive");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    QuantileParams qp{q_alpha[i], s_beta[i], xi};
    if (ctx.variant == PpVariant::gev) {
      const GevParams g = reparam_to_classic(qp, alpha, beta);
      const double t_u = 1.0 + g.xi * (u[i] - g.mu) / g.sigma;
      const double t_y = 1.0 + g.xi * (y[i] - g.mu) / g.sigma;
      if (g.xi > 0.0 && (t_u <= 0.0 || t_y <= 0.0))
        throw DomainError("pp_nll: observation or threshold below the lower endpoint at cell " + std::to_string(i));
      acc += std::pow(t_u, -1.0 / g.xi) / ctx.n_y;
      if (y[i] > u[i]) acc -= (-1.0 / g.xi - 1.0) * std::log(t_y) - std::log(g.sigma);
    } else {
      const BgevDerived d = bgev_derive(qp, ctx.blend);
      acc += -bgev_logcdf_impl(u[i], d, ctx.blend) / ctx.n_y;
      if (y[i] > u[i]) acc -= std::log(bgev_dlogcdf_impl(y[i], d, ctx.blend));
    }
  }
  return acc;
}

}  // namespace evreg::evt
