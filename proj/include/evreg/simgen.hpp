#pragma once

// Synthetic data generators for the simulation studies: correlated predictor
// draws, closed-form truth surfaces, and response samplers for the
// point-process, log-normal, and generalized-Pareto generating laws.

#include <cstdint>
#include <Eigen/Dense>

#include "evreg/evt.hpp"
#include "evreg/rng.hpp"

namespace evreg {

/// Generating scenario. The b1 pair shares one structural layout (linear +
/// additive + nonlinear blocks over ten predictors) and differs in the block
/// formulas; the b2 pair draws from misspecified laws (log-normal, GPD); the
/// b3 trio varies the truth's functional complexity over twelve predictors.
enum class Study {
  b1_case1,
  b1_case2,
  b2_lognormal,
  b2_gpd,
  b3_linear,
  b3_additive,
  b3_nonlinear,
};

/// Number of predictor columns the study draws (10 or 12).
int study_dim(Study study);

/// Pairwise predictor correlation the study uses.
double study_correlation(Study study);

/// Threshold probability for the point-process studies (0.99 for b1, 0.95
/// for b3); 0 for the b2 studies, which have no threshold.
double study_threshold_prob(Study study);

/// Smooth six-variable test functions used by the nonlinear truth blocks.
/// Only the first six entries of x are read; x must have size >= 6.
double m_n1(const Eigen::ArrayXd& x);
double m_n2(const Eigen::ArrayXd& x);

/// Coefficients (on x7, x8) of the linear block of a b1 truth surface.
/// surface 0 is the location-like surface, 1 the spread-like surface.
Eigen::Array2d b1_linear_coeffs(Study study, int surface);

/// One additive-block component of a b1 truth surface evaluated at x.
/// which selects the predictor: 0 acts on x9, 1 on x10.
double b1_additive_component(Study study, int surface, int which, double x);

/// Full b1 truth surfaces at one predictor row (size 10): location
/// q = 1 + linear + additive + m_n1, spread s = exp(-0.5 + ...m_n2 analogue).
void b1_truth(Study study, const Eigen::ArrayXd& x, double& q, double& s);

/// Coefficient vectors for the b3 linear and additive truths. Entries are
/// drawn once from fixed lattices (eta_q from {-1,-0.9,...,1}, eta_s from
/// {-0.5,-0.4,...,0.5}) under coeff_seed and are meant to be shared across
/// every replicate set of a study; record them in run manifests.
struct B3Coefficients {
  Eigen::ArrayXd eta_q;
  Eigen::ArrayXd eta_s;
};

/// Draws the frozen coefficient vectors for b3_linear (length 12 each) or
/// b3_additive (length 36 each, acting on the per-predictor cubic expansion
/// (x^3, x^2, x) of all twelve columns). Throws for other studies.
B3Coefficients b3_coefficients(Study study, std::uint64_t coeff_seed);

/// Full b3 truth surfaces at one predictor row (size 12). coeffs is ignored
/// for b3_nonlinear and required for the other two cases.
void b3_truth(Study study, const B3Coefficients& coeffs,
              const Eigen::ArrayXd& x, double& q, double& s);

/// n x d draws with N(0,1) margins and equal pairwise correlation rho.
/// Valid range: -1/(d-1) < rho < 1. Exact construction (no factorization):
/// each row mixes the i.i.d. draw z as alpha*mean(z) + beta*(z - mean(z)).
Eigen::ArrayXXd sample_equicorrelated(long n, int d, double rho, Rng& rng);

/// Threshold with non-exceedance probability p_u under the classical
/// max-stable law matching qp at the median/median parameterization.
double pp_threshold(const evt::QuantileParams& qp, double p_u);

/// One draw from the exceedance law above u: conditional on exceeding, the
/// survivor function of the draw is the ratio of tail intensities
/// Lambda(y)/Lambda(u). Inverts the intensity directly, so the draw is
/// always strictly above u.
double sample_pp_exceedance(double u, const evt::QuantileParams& qp, Rng& rng);

/// One simulated replicate set.
struct SimulatedData {
  Eigen::ArrayXXd X;  ///< n x d predictors
  Eigen::ArrayXd y;   ///< responses
  Eigen::ArrayXd u;   ///< per-cell thresholds (empty for the b2 studies)
  /// True generating parameter surfaces, for diagnostics: location/spread
  /// for the point-process studies, log-mean/log-sd for b2_lognormal,
  /// scale/shape for b2_gpd.
  Eigen::ArrayXd q;
  Eigen::ArrayXd s;
  double xi = 0.0;  ///< true shape (0 for the b2 studies)
  double p_u = 0.0;  ///< threshold probability (0 for the b2 studies)
  B3Coefficients coeffs;  ///< frozen draws (empty unless b3 linear/additive)
};

/// One simulated study replicate.
///
/// seed controls everything drawn for this set; coeff_seed controls only the
/// frozen b3 coefficient lattices, so different sets (different seeds) of the
/// same study share identical truth coefficients.
///
/// Point-process studies: each cell exceeds its threshold with probability
/// 1 - p_u; exceedances follow the intensity-ratio law, sub-threshold cells
/// are filled uniformly on [u - s - 1, u) and carry no tail information.
struct ScenarioSpec {
  Study study = Study::b1_case1;
  long n = 0;
  std::uint64_t seed = 0;
  std::uint64_t coeff_seed = 7777;
};

SimulatedData simulate(const ScenarioSpec& spec);

}  // namespace evreg
