#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace evreg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators for one parameter block. Allocated lazily
// on the first step so callers can default-construct per-block state.
struct AdamState {
  Eigen::ArrayXXd m;
  Eigen::ArrayXXd v;
  std::int64_t t = 0;
};

// One bias-corrected update of `param` in place given its gradient.
void adam_step(Eigen::ArrayXXd& param, const Eigen::ArrayXXd& grad, AdamState& state, const AdamConfig& cfg);

}  // namespace evreg
