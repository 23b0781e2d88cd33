#include "evreg/bootstrap.hpp"

#include <algorithm>
#include <stdexcept>

#include "evreg/stats.hpp"

namespace evreg {

std::vector<int> wrapped_block(int t_star, int k, int t_len) {
  if (t_star < 0 || t_star >= t_len) throw std::invalid_argument("wrapped_block: start outside range");
  if (k < 1) throw std::invalid_argument("wrapped_block: block must be nonempty");
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = (t_star + j) % t_len;
  return out;
}

std::vector<int> stationary_resample(int t_len, double mean_block_len, Rng& rng,
                                     std::vector<std::int64_t>* drawn_block_lens) {
  if (t_len < 1) throw std::invalid_argument("stationary_resample: empty time axis");
  if (mean_block_len < 1.0)
    throw std::invalid_argument("stationary_resample: mean block length below one");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(t_len));
  while (static_cast<int>(out.size()) < t_len) {
    const int t_star = static_cast<int>(rng.below(t_len));
    const std::int64_t k = rng.geometric_mean(mean_block_len);
    if (drawn_block_lens) drawn_block_lens->push_back(k);
    const int take = static_cast<int>(
        std::min<std::int64_t>(k, static_cast<std::int64_t>(t_len - static_cast<int>(out.size()))));
    for (int j = 0; j < take; ++j) out.push_back((t_star + j) % t_len);
  }
  return out;
}

std::vector<std::vector<int>> stationary_bootstrap(int t_len, const BootstrapPlan& plan) {
  if (plan.b < 1) throw std::invalid_argument("stationary_bootstrap: need at least one replicate");
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(plan.b));
  for (int r = 0; r < plan.b; ++r) {
    Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(r)));
    out.push_back(stationary_resample(t_len, plan.mean_block_len, rng));
  }
  return out;
}

Envelope pointwise_envelope(const Eigen::ArrayXXd& samples, double lo_p, double hi_p) {
  if (samples.rows() < 1) throw std::invalid_argument("pointwise_envelope: no replicates");
  if (!(lo_p >= 0.0 && lo_p <= hi_p && hi_p <= 1.0))
    throw std::invalid_argument("pointwise_envelope: bad quantile bounds");
  Envelope env;
  env.median.resize(samples.cols());
  env.lo.resize(samples.cols());
  env.hi.resize(samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const Eigen::ArrayXd sorted = sorted_copy(samples.col(j));
    env.median(j) = quantile_sorted(sorted, 0.5);
    env.lo(j) = quantile_sorted(sorted, lo_p);
    env.hi(j) = quantile_sorted(sorted, hi_p);
  }
  return env;
}

}  // namespace evreg
