#pragma once

#include <cstdint>
#include <string_view>

namespace evreg {

// log of the beta function B(a,b).
double log_beta(double a, double b);

// Regularised incomplete beta I_x(a,b) by Lentz continued fractions,
// converged to 1e-12. x outside [0,1] saturates to 0/1.
double ibeta_reg(double x, double a, double b);

// Density of the Beta(a,b) law; 0 outside (0,1).
double beta_pdf(double x, double a, double b);

// Standard normal quantile (Wichura's PPND16, ~1e-15 absolute accuracy).
double normal_quantile(double p);

// Standard normal cdf.
double normal_cdf(double z);

// FNV-1a 64-bit content hash, used for config and file fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed);

}  // namespace evreg
