#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "evreg/rng.hpp"

namespace evreg {

struct BootstrapPlan {
  int b = 200;                  // replicate count
  double mean_block_len = 2.0;  // expected block length
  std::uint64_t seed = 0;
};

// Block of k consecutive time indices starting at t_star, wrapping past the
// end: {t_star, ..., t_len-1, 0, 1, ...}. Indices are 0-based.
std::vector<int> wrapped_block(int t_star, int k, int t_len);

// One resampled time-index sequence of length exactly t_len: blocks start
// uniformly at random with geometric lengths of the given mean, and the
// final block is truncated. When `drawn_block_lens` is given, the geometric
// draws are appended to it (pre-truncation).
std::vector<int> stationary_resample(int t_len, double mean_block_len, Rng& rng,
                                     std::vector<std::int64_t>* drawn_block_lens = nullptr);

// All plan.b sequences; replicate r uses the stream derive_seed(seed, r).
std::vector<std::vector<int>> stationary_bootstrap(int t_len, const BootstrapPlan& plan);

// Pointwise summary across replicates: for each column of `samples` (rows
// are replicates), the empirical median and the lo/hi quantiles.
struct Envelope {
  Eigen::ArrayXd median, lo, hi;
};

Envelope pointwise_envelope(const Eigen::ArrayXXd& samples, double lo_p = 0.025, double hi_p = 0.975);

}  // namespace evreg
