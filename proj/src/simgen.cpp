#include "evreg/simgen.hpp"

#include <cmath>
#include <stdexcept>

namespace evreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool is_b1(Study s) { return s == Study::b1_case1 || s == Study::b1_case2; }
bool is_b2(Study s) { return s == Study::b2_lognormal || s == Study::b2_gpd; }

// Lattice value grids for the b3 coefficient draws.
double lattice21(std::uint64_t idx) { return -1.0 + 0.1 * double(idx); }
double lattice11(std::uint64_t idx) { return -0.5 + 0.1 * double(idx); }

// Cubic expansion (x^3, x^2, x) per predictor, concatenated column-wise.
Eigen::ArrayXd cubic_expand(const Eigen::ArrayXd& x) {
  Eigen::ArrayXd out(3 * x.size());
  for (long j = 0; j < x.size(); ++j) {
    const double v = x(j);
    out(3 * j) = v * v * v;
    out(3 * j + 1) = v * v;
    out(3 * j + 2) = v;
  }
  return out;
}

}  // namespace

int study_dim(Study study) { return is_b1(study) || is_b2(study) ? 10 : 12; }

double study_correlation(Study study) { return is_b1(study) ? 0.5 : 0.3; }

double study_threshold_prob(Study study) {
  if (is_b1(study)) return 0.99;
  if (is_b2(study)) return 0.0;
  return 0.95;
}

double m_n1(const Eigen::ArrayXd& x) {
  require(x.size() >= 6, "m_n1: needs at least 6 entries");
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4),
               x6 = x(5);
  const double sum6 = x1 + x2 + x3 + x4 + x5 + x6;
  return 0.1 * (x1 * x2 + x2 * (1.0 - std::cos(kPi * x2 * x3)) +
                2.0 * std::sin(x3) / (std::abs(x3 - x4) + 2.0) +
                0.2 * std::pow(x4 + x4 * x5 / 2.0, 2) -
                std::sqrt(x5 * x5 + x6 * x6 + 2.0) +
                std::exp(-12.0 + sum6 / 10.0));
}

double m_n2(const Eigen::ArrayXd& x) {
  require(x.size() >= 6, "m_n2: needs at least 6 entries");
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4),
               x6 = x(5);
  const double sum6 = x1 + x2 + x3 + x4 + x5 + x6;
  return 0.1 * (0.7 * x1 * x2 - 5.0 +
                x2 * (1.0 - std::cos(kPi * x2 * x3)) +
                3.0 * std::sin(x3) / (std::abs(x3 - x4) + 2.0) +
                0.2 * std::pow(x4 + x4 * x5 / 2.0 - 1.0, 2) +
                std::exp(-18.0 + sum6 / 10.0));
}

Eigen::Array2d b1_linear_coeffs(Study study, int surface) {
  require(is_b1(study), "b1_linear_coeffs: b1 studies only");
  require(surface == 0 || surface == 1, "b1_linear_coeffs: surface in {0,1}");
  if (study == Study::b1_case1) {
    return surface == 0 ? Eigen::Array2d(0.8, 2.0) : Eigen::Array2d(0.4, -0.2);
  }
  return surface == 0 ? Eigen::Array2d(0.0, -0.5) : Eigen::Array2d(0.0, 0.3);
}

double b1_additive_component(Study study, int surface, int which, double x) {
  require(is_b1(study), "b1_additive_component: b1 studies only");
  require(surface == 0 || surface == 1,
          "b1_additive_component: surface in {0,1}");
  require(which == 0 || which == 1, "b1_additive_component: which in {0,1}");
  const double x2 = x * x, x3 = x2 * x;
  if (study == Study::b1_case1) {
    if (surface == 0) {
      return which == 0 ? 0.2 * (0.1 * x3 - x2 + x)
                        : 0.2 * (0.4 * x3 - 2.0 * x);
    }
    return which == 0 ? 0.2 * (0.2 * x3 - 0.3 * x2 + x)
                      : 0.2 * (-0.1 * x3 + 0.2 * x2 - 0.5 * x);
  }
  if (surface == 0) return which == 0 ? 0.0 : x;
  return which == 0 ? 0.0 : 0.2 * (0.1 * x3 - 0.3 * x2 - x);
}

void b1_truth(Study study, const Eigen::ArrayXd& x, double& q, double& s) {
  require(is_b1(study), "b1_truth: b1 studies only");
  require(x.size() == 10, "b1_truth: predictor row must have 10 entries");
  const Eigen::Array2d lin_q = b1_linear_coeffs(study, 0);
  const Eigen::Array2d lin_s = b1_linear_coeffs(study, 1);
  const double lq = lin_q(0) * x(6) + lin_q(1) * x(7);
  const double ls = lin_s(0) * x(6) + lin_s(1) * x(7);
  const double aq = b1_additive_component(study, 0, 0, x(8)) +
                    b1_additive_component(study, 0, 1, x(9));
  const double as = b1_additive_component(study, 1, 0, x(8)) +
                    b1_additive_component(study, 1, 1, x(9));
  q = 1.0 + lq + aq + m_n1(x);
  s = std::exp(-0.5 + ls + as + m_n2(x));
}

B3Coefficients b3_coefficients(Study study, std::uint64_t coeff_seed) {
  require(study == Study::b3_linear || study == Study::b3_additive,
          "b3_coefficients: coefficient-based b3 studies only");
  const long len = study == Study::b3_linear ? 12 : 36;
  const std::uint64_t stream = study == Study::b3_linear ? 1 : 2;
  Rng rng(derive_seed(coeff_seed, stream));
  B3Coefficients out;
  out.eta_q.resize(len);
  out.eta_s.resize(len);
  for (long j = 0; j < len; ++j) out.eta_q(j) = lattice21(rng.below(21));
  for (long j = 0; j < len; ++j) out.eta_s(j) = lattice11(rng.below(11));
  return out;
}

void b3_truth(Study study, const B3Coefficients& coeffs,
              const Eigen::ArrayXd& x, double& q, double& s) {
  require(x.size() == 12, "b3_truth: predictor row must have 12 entries");
  switch (study) {
    case Study::b3_linear: {
      require(coeffs.eta_q.size() == 12 && coeffs.eta_s.size() == 12,
              "b3_truth: linear coefficients must have length 12");
      q = 1.0 + (x * coeffs.eta_q).sum();
      s = std::exp(0.5 + (x * coeffs.eta_s).sum());
      return;
    }
    case Study::b3_additive: {
      require(coeffs.eta_q.size() == 36 && coeffs.eta_s.size() == 36,
              "b3_truth: additive coefficients must have length 36");
      const Eigen::ArrayXd xs = cubic_expand(x);
      q = 15.0 + (xs * coeffs.eta_q).sum();
      s = std::exp(1.0 - 0.05 * (xs * coeffs.eta_s).sum());
      return;
    }
    case Study::b3_nonlinear: {
      const Eigen::ArrayXd head = x.head(6);
      const Eigen::ArrayXd tail = x.tail(6);
      q = 20.0 + 25.0 * (m_n1(head) + std::abs(m_n1(tail)));
      s = std::exp(0.5 - (m_n2(head) - m_n2(tail)));
      return;
    }
    default:
      throw std::invalid_argument("b3_truth: b3 studies only");
  }
}

Eigen::ArrayXXd sample_equicorrelated(long n, int d, double rho, Rng& rng) {
  require(n >= 1, "sample_equicorrelated: n must be positive");
  require(d >= 1, "sample_equicorrelated: d must be positive");
  const double lo = d > 1 ? -1.0 / double(d - 1) : -1.0;
  require(rho > lo && rho < 1.0, "sample_equicorrelated: rho out of range");
  // Spectral square root of (1-rho) I + rho 1 1^T: alpha scales the mean
  // direction, beta the centered remainder.
  const double alpha = std::sqrt(1.0 + double(d - 1) * rho);
  const double beta = std::sqrt(1.0 - rho);
  Eigen::ArrayXXd out(n, d);
  Eigen::ArrayXd z(d);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    const double zbar = z.mean();
    for (int j = 0; j < d; ++j) out(i, j) = alpha * zbar + beta * (z(j) - zbar);
  }
  return out;
}

double pp_threshold(const evt::QuantileParams& qp, double p_u) {
  require(p_u > 0.0 && p_u < 1.0, "pp_threshold: p_u must be in (0,1)");
  return evt::gev_quantile(p_u, evt::reparam_to_classic(qp, 0.5, 0.5));
}

double sample_pp_exceedance(double u, const evt::QuantileParams& qp,
                            Rng& rng) {
  const evt::GevParams g = evt::reparam_to_classic(qp, 0.5, 0.5);
  // Tail intensity Lambda(z) = (1 + xi (z - mu)/sigma)^(-1/xi); conditional
  // on exceeding u the intensity of the draw is uniform on (0, Lambda(u)).
  const double arg_u = 1.0 + g.xi * (u - g.mu) / g.sigma;
  require(arg_u > 0.0, "sample_pp_exceedance: u outside support");
  const double lam_u = std::pow(arg_u, -1.0 / g.xi);
  const double t = rng.uniform() * lam_u;
  return g.mu + g.sigma * (std::pow(t, -g.xi) - 1.0) / g.xi;
}

SimulatedData simulate(const ScenarioSpec& spec) {
  require(spec.n >= 1, "simulate: n must be positive");
  const Study study = spec.study;
  const int d = study_dim(study);
  const double rho = study_correlation(study);

  SimulatedData out;
  Rng rng(spec.seed);
  out.X = sample_equicorrelated(spec.n, d, rho, rng);
  out.y.resize(spec.n);
  out.q.resize(spec.n);
  out.s.resize(spec.n);

  if (study == Study::b3_linear || study == Study::b3_additive) {
    out.coeffs = b3_coefficients(study, spec.coeff_seed);
  }

  if (is_b2(study)) {
    for (long i = 0; i < spec.n; ++i) {
      const Eigen::ArrayXd x = out.X.row(i).transpose();
      if (study == Study::b2_lognormal) {
        out.q(i) = 6.0 + 0.2 * m_n1(x);
        out.s(i) = 0.5;
        out.y(i) = std::exp(out.q(i) + out.s(i) * rng.normal());
      } else {
        out.q(i) = std::exp(0.5 - 3.0 * m_n2(x));
        out.s(i) = 0.1;
        out.y(i) = evt::gpd_quantile(rng.uniform(),
                                     evt::GpdParams{out.q(i), out.s(i)});
      }
    }
    return out;
  }

  out.xi = is_b1(study) ? 0.2 : 0.25;
  out.p_u = study_threshold_prob(study);
  out.u.resize(spec.n);
  for (long i = 0; i < spec.n; ++i) {
    const Eigen::ArrayXd x = out.X.row(i).transpose();
    double q = 0.0, s = 0.0;
    if (is_b1(study)) {
      b1_truth(study, x, q, s);
    } else {
      b3_truth(study, out.coeffs, x, q, s);
    }
    out.q(i) = q;
    out.s(i) = s;
    const evt::QuantileParams qp{q, s, out.xi};
    out.u(i) = pp_threshold(qp, out.p_u);
    if (rng.uniform() > out.p_u) {
      out.y(i) = sample_pp_exceedance(out.u(i), qp, rng);
    } else {
      // Filler below the threshold; uniform keeps it bounded away from u's
      // scale-free tail and carries no information about the exceedance law.
      out.y(i) = out.u(i) - (s + 1.0) * rng.uniform();
    }
  }
  return out;
}

}  // namespace evreg
