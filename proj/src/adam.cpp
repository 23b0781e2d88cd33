#include "evreg/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace evreg {

void adam_step(Eigen::ArrayXXd& param, const Eigen::ArrayXXd& grad, AdamState& state, const AdamConfig& cfg) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
  if (state.t == 0) {
    state.m.setZero(param.rows(), param.cols());
    state.v.setZero(param.rows(), param.cols());
  } else if (state.m.rows() != param.rows() || state.m.cols() != param.cols()) {
    throw std::invalid_argument("adam_step: state shape mismatch");
  }
  ++state.t;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  param -= cfg.lr * (state.m / bc1) / ((state.v / bc2).sqrt() + cfg.eps);
}

}  // namespace evreg
