#include <cmath>
#include <vector>

#include "doctest.h"
#include "evreg/evt.hpp"
#include "evreg/rng.hpp"
#include "evreg/special.hpp"

using namespace evreg;
using namespace evreg::evt;

namespace {
// Reference values computed with 50-digit arithmetic.
constexpr double kTol = 1e-13;

bool close(double a, double b, double tol = kTol) { return std::fabs(a - b) <= tol * (1.0 + std::fabs(b)); }
}  // namespace

TEST_CASE("special function reference values") {
  CHECK(close(ibeta_reg(0.3, 5, 5), 0.09880866));
  CHECK(close(ibeta_reg(0.5, 5, 5), 0.5));
  CHECK(close(ibeta_reg(0.9, 5, 5), 0.99910908));
  CHECK(close(ibeta_reg(0.62, 3.5, 4.2), 0.82168960351451787));
  CHECK(close(ibeta_reg(0.05, 4.5, 3.2), 2.7833138123838211e-5, 1e-12));
  CHECK(ibeta_reg(-0.5, 5, 5) == 0.0);
  CHECK(ibeta_reg(1.5, 5, 5) == 1.0);
  CHECK(close(beta_pdf(0.3, 5, 5), 1.2252303));
  CHECK(close(normal_quantile(0.975), 1.9599639845400542, 1e-14));
  CHECK(close(normal_quantile(0.99), 2.3263478740408411, 1e-14));
  CHECK(close(normal_quantile(1e-9), -5.9978070150076869, 1e-14));
  CHECK(normal_quantile(0.5) == 0.0);
  for (double p : {1e-8, 1e-3, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9}) CHECK(close(normal_cdf(normal_quantile(p)), p, 1e-11));
}

TEST_CASE("gev cdf, quantile, logpdf against reference values") {
  const GevParams p{0.0, 1.0, 0.2};
  CHECK(close(gev_cdf(2.0, p), 0.83032803607780859));
  CHECK(close(gev_cdf(0.5, p), 0.53744904522302417));
  CHECK(close(gev_quantile(0.99, p), 7.5468264085857834));
  CHECK(close(gev_quantile(0.5, p), 0.38028042569502561));
  CHECK(close(gev_logpdf(2.0, p), -2.2047678518091482));

  const GevParams g{0.0, 1.0, 0.0};
  CHECK(close(gev_cdf(1.3, g), 0.76144922000941527));
  CHECK(close(gev_logpdf(1.3, g), -1.5725317930340126));
  CHECK(close(gev_quantile(0.99, g), 4.60014922677658));

  // Support boundary: below the lower endpoint mass is zero.
  CHECK(gev_cdf(-5.01, p) == 0.0);
  CHECK(gev_logpdf(-5.01, p) == kLogZero);
  const GevParams neg{0.0, 1.0, -0.3};
  CHECK(gev_cdf(10.0, neg) == 1.0);

  for (double prob : {0.01, 0.2, 0.5, 0.9, 0.999})
    for (const auto& par : {p, g, neg}) CHECK(close(gev_cdf(gev_quantile(prob, par), par), prob, 1e-12));

  CHECK_THROWS_AS(gev_cdf(1.0, GevParams{0.0, -1.0, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(gev_quantile(0.0, p), std::invalid_argument);
}

TEST_CASE("quantile-spread reparameterisation") {
  SUBCASE("reference values at alpha = beta = 0.5") {
    const GevParams a = reparam_to_classic({0.0, 1.0, 0.2}, 0.5, 0.5);
    CHECK(close(a.sigma, 0.57768149024173918));
    CHECK(close(a.mu, -0.21968096302526536));
    const GevParams b = reparam_to_classic({0.0, 1.0, 0.35}, 0.5, 0.5);
    CHECK(close(b.sigma, 0.53464642340511225));
    CHECK(close(b.mu, -0.20907843149355893));
    const GevParams c = reparam_to_classic({0.0, 1.0, 0.0}, 0.5, 0.5);
    CHECK(close(c.sigma, 0.63591646650643713));
    CHECK(close(c.mu, -0.23307160138524639));
  }

  SUBCASE("round trip: mapped parameters reproduce the named quantile and spread") {
    Rng rng(20240811);
    for (int k = 0; k < 1000; ++k) {
      QuantileParams qp;
      qp.q_alpha = rng.uniform(-5.0, 5.0);
      qp.s_beta = rng.uniform(0.05, 4.0);
      qp.xi = k % 7 == 0 ? 0.0 : rng.uniform(0.01, 0.9);
      const double alpha = rng.uniform(0.05, 0.95);
      const double beta = rng.uniform(0.05, 0.95);
      const GevParams g = reparam_to_classic(qp, alpha, beta);
      const double q = gev_quantile(alpha, g);
      const double spread = gev_quantile(1.0 - beta / 2.0, g) - gev_quantile(beta / 2.0, g);
      CHECK(std::fabs(q - qp.q_alpha) <= 1e-10 * (1.0 + std::fabs(qp.q_alpha)));
      CHECK(std::fabs(spread - qp.s_beta) <= 1e-10 * (1.0 + qp.s_beta));
    }
  }

  CHECK_THROWS_AS(reparam_to_classic({0.0, -1.0, 0.2}, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("blended law: derived components and pinning") {
  const QuantileParams qp{0.0, 1.0, 0.2};
  const BgevConfig cfg{};
  const BgevDerived d = bgev_derive(qp, cfg);
  CHECK(close(d.b1, -0.78878345276520058));
  CHECK(close(d.b2, -0.48191372599356446));
  CHECK(close(d.gumbel.mu, -0.24686813185557667));
  CHECK(close(d.gumbel.sigma, 0.49391259746784774));
  // Both components pass through (b1, p_a) and (b2, p_b); so does the blend.
  CHECK(close(gev_cdf(d.b1, d.gumbel), cfg.p_a, 1e-12));
  CHECK(close(gev_cdf(d.b2, d.gumbel), cfg.p_b, 1e-12));
  CHECK(close(bgev_cdf(d.b1, qp, cfg), cfg.p_a, 1e-12));
  CHECK(close(bgev_cdf(d.b2, qp, cfg), cfg.p_b, 1e-12));

  CHECK_THROWS_AS(bgev_derive({0.0, 1.0, -0.1}, cfg), std::invalid_argument);
  BgevConfig bad = cfg;
  bad.p_b = bad.p_a;
  CHECK_THROWS_AS(bgev_derive(qp, bad), std::invalid_argument);
  BgevConfig bad2 = cfg;
  bad2.c1 = 2.0;
  CHECK_THROWS_AS(bgev_derive(qp, bad2), std::invalid_argument);
}

TEST_CASE("blended cdf and log-density reference values") {
  const QuantileParams qp{0.0, 1.0, 0.2};
  const BgevConfig cfg{};
  const double zmid = -0.63534858937938252;
  CHECK(close(bgev_cdf(zmid, qp, cfg), 0.11245057404934551));
  CHECK(close(bgev_logpdf(zmid, qp, cfg), -0.66124606020470624, 1e-11));
  CHECK(close(bgev_logpdf(-0.71206602107229155, qp, cfg), -0.90627117939952607, 1e-11));
  // Outside the blend window the law coincides with its components.
  const BgevDerived d = bgev_derive(qp, cfg);
  CHECK(bgev_cdf(d.b1 - 0.4, qp, cfg) == gev_cdf(d.b1 - 0.4, d.gumbel));
  CHECK(bgev_cdf(d.b2 + 0.4, qp, cfg) == gev_cdf(d.b2 + 0.4, d.frechet));
  // The heavy-tailed lower endpoint is an interior point of the blend's
  // support: positive mass below it, finite log-density.
  const double lower_end = d.frechet.mu - d.frechet.sigma / d.frechet.xi;
  CHECK(bgev_cdf(lower_end, qp, cfg) > 0.0);
  CHECK(bgev_logpdf(lower_end - 1.0, qp, cfg) > kLogZero);
}

TEST_CASE("blended family is continuous at the blend boundaries") {
  Rng rng(7771);
  for (int k = 0; k < 50; ++k) {
    QuantileParams qp{rng.uniform(-2.0, 2.0), rng.uniform(0.2, 3.0), rng.uniform(0.05, 0.8)};
    const BgevConfig cfg{};
    const BgevDerived d = bgev_derive(qp, cfg);
    const double eps = 1e-9 * (1.0 + std::fabs(d.b1));
    for (double b : {d.b1, d.b2}) {
      const double lo = bgev_cdf(b - eps, qp, cfg);
      const double hi = bgev_cdf(b + eps, qp, cfg);
      CHECK(std::fabs(hi - lo) < 1e-6);
      const double dlo = bgev_logpdf(b - eps, qp, cfg);
      const double dhi = bgev_logpdf(b + eps, qp, cfg);
      CHECK(std::fabs(dhi - dlo) < 1e-4 * (1.0 + std::fabs(dlo)));
    }
  }
}

TEST_CASE("blended quantile: reference values and round trip") {
  const QuantileParams qp{0.0, 1.0, 0.2};
  const BgevConfig cfg{};
  CHECK(close(bgev_quantile(0.5, qp, cfg), 0.0, 1e-12));
  CHECK(close(bgev_quantile(0.99, qp, cfg), 4.1399809632822824));
  CHECK(close(bgev_quantile(0.12, qp, cfg), -0.62094655664016114, 1e-10));
  CHECK(close(bgev_quantile(0.04, qp, cfg), -0.8242678503714423));
  // Above p_b the blend quantile is exactly the heavy-tailed quantile.
  const BgevDerived d = bgev_derive(qp, cfg);
  for (double p : {0.2, 0.35, 0.8, 0.999}) CHECK(bgev_quantile(p, qp, cfg) == gev_quantile(p, d.frechet));
  for (double p : {0.001, 0.04, 0.11, 0.17, 0.5, 0.97})
    CHECK(std::fabs(bgev_cdf(bgev_quantile(p, qp, cfg), qp, cfg) - p) <= 1e-10);
}

TEST_CASE("generalised Pareto reference values") {
  const GpdParams p{2.0, 0.1};
  CHECK(close(gpd_cdf(3.0, p), 0.75281529387813435));
  CHECK(close(gpd_quantile(0.95, p), 6.9856569534712663));
  CHECK(gpd_cdf(-0.5, p) == 0.0);
  CHECK(gpd_quantile(0.0, p) == 0.0);
  for (double prob : {0.1, 0.5, 0.99}) CHECK(close(gpd_cdf(gpd_quantile(prob, p), p), prob, 1e-12));
  const GpdParams ex{1.5, 0.0};
  CHECK(close(gpd_cdf(1.5, ex), 1.0 - std::exp(-1.0), 1e-14));
}

TEST_CASE("point-process likelihood: single-cell composition") {
  const double u = -0.38191372599356446;
  const double y = 0.11808627400643554;
  Eigen::ArrayXd ys(1), us(1), q(1), s(1);
  ys << y;
  us << u;
  q << 0.0;
  s << 1.0;
  PpContext ctx;
  ctx.variant = PpVariant::bgev;
  const double nll_b = pp_nll(ys, us, q, s, 0.2, ctx);
  CHECK(close(nll_b, 1.4499493740536114, 1e-11));
  // Composition identity against the scalar pieces.
  const QuantileParams qp{0.0, 1.0, 0.2};
  const double composed =
      -std::log(bgev_cdf(u, qp, BgevConfig{})) - (bgev_logpdf(y, qp, BgevConfig{}) - std::log(bgev_cdf(y, qp, BgevConfig{})));
  CHECK(close(nll_b, composed, 1e-11));
  // Everything sits above b2 here, so the heavy-tail variant agrees.
  ctx.variant = PpVariant::gev;
  CHECK(close(pp_nll(ys, us, q, s, 0.2, ctx), nll_b, 1e-10));
}

TEST_CASE("point-process likelihood: exposure, scaling, domain checks") {
  Eigen::ArrayXd ys(2), us(2), q(2), s(2);
  ys << -1.0, 0.5;  // first cell below threshold, second an exceedance
  us << -0.3, -0.3;
  q << 0.0, 0.0;
  s << 1.0, 1.0;
  PpContext ctx;
  const double base = pp_nll(ys, us, q, s, 0.2, ctx);
  // A censored cell contributes exposure only.
  Eigen::ArrayXd y1(1), u1(1), q1(1), s1(1);
  y1 << -1.0;
  u1 << -0.3;
  q1 << 0.0;
  s1 << 1.0;
  const double exposure = pp_nll(y1, u1, q1, s1, 0.2, ctx);
  CHECK(close(exposure, -std::log(bgev_cdf(-0.3, QuantileParams{0.0, 1.0, 0.2}, BgevConfig{})), 1e-12));
  PpContext half = ctx;
  half.n_y = 2.0;
  CHECK(close(pp_nll(y1, u1, q1, s1, 0.2, half), exposure / 2.0, 1e-12));
  CHECK(base > exposure);

  // The heavy-tail variant rejects data below its lower endpoint (-3.108 here);
  // the blended variant stays finite on the same input.
  Eigen::ArrayXd ylo(1), ulo(1);
  ylo << -3.5;
  ulo << -3.8;
  PpContext gev_ctx;
  gev_ctx.variant = PpVariant::gev;
  CHECK_THROWS_AS(pp_nll(ylo, ulo, q1, s1, 0.2, gev_ctx), DomainError);
  PpContext bgev_ctx;
  CHECK(std::isfinite(pp_nll(ylo, ulo, q1, s1, 0.2, bgev_ctx)));
}

TEST_CASE("exceedance process maxima follow the blended law") {
  // Simulate the exceedance point process above u and compare the empirical
  // law of the per-period maximum with the blended cdf.
  const QuantileParams qp{1.0, 2.0, 0.25};
  const BgevConfig cfg{};
  const double u = bgev_quantile(0.9, qp, cfg);
  const double log_gu = std::log(bgev_cdf(u, qp, cfg));
  const double lambda0 = -log_gu;
  const int n = 100000;
  Rng rng(99173);
  std::vector<double> maxima(n);
  for (int i = 0; i < n; ++i) {
    int k = 0;
    double prod = rng.uniform();
    const double floor_p = std::exp(-lambda0);
    while (prod > floor_p) {
      ++k;
      prod *= rng.uniform();
    }
    double m = u - 1.0;  // sentinel below the threshold when no point lands
    for (int j = 0; j < k; ++j) {
      const double z = bgev_quantile(std::exp(rng.uniform() * log_gu), qp, cfg);
      m = std::max(m, z);
    }
    maxima[i] = m;
  }
  std::sort(maxima.begin(), maxima.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    if (maxima[i] <= u) continue;
    const double model = bgev_cdf(maxima[i], qp, cfg);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    ks = std::max({ks, std::fabs(model - lo), std::fabs(model - hi)});
  }
  CHECK(ks < 0.01);
}
