#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "evreg/evt.hpp"
#include "evreg/tape.hpp"

namespace evreg {

// Cell selections for the point-process likelihood. Row indices address the
// model's parameter columns (valid-cell order). Exceedance rows must be the
// subset of observed rows whose response exceeds its threshold; thresholds
// and responses are aligned with their own row lists.
struct PpData {
  std::shared_ptr<const std::vector<int>> obs_rows;
  std::shared_ptr<const std::vector<int>> exc_rows;
  std::shared_ptr<const ad::Arr> u_obs;  // thresholds at observed rows
  std::shared_ptr<const ad::Arr> y_exc;  // responses at exceedance rows
  double n_y = 1.0;                      // observations per return period

  void validate() const;
};

// Summed point-process negative log-likelihood under the blended law:
//   sum_obs (1/n_y) * (-log G(u)) - sum_exc log(d log G / dz at y).
// Built from q/s parameter columns and the shared shape (all tape
// variables), so gradients flow to every surface. Finite for every
// parameter setting: the support and saturation hazards are clamped, and
// the clamped branches carry zero gradient. xi must be positive.
ad::Var bgev_pp_nll(ad::Tape& tape, ad::Var q, ad::Var s, ad::Var xi, const PpData& data,
                    const evt::BgevConfig& cfg);

// Same likelihood under the unblended law. Throws evt::DomainError as soon
// as any observed threshold or exceedance falls below the lower endpoint of
// its cell's law, which is the failure mode the blended variant removes.
ad::Var gev_pp_nll(ad::Tape& tape, ad::Var q, ad::Var s, ad::Var xi, const PpData& data, double alpha,
                   double beta);

// Mean tilted (pinball) loss at level tau over rows aligned with q.
ad::Var tilted_loss(ad::Tape& tape, ad::Var q, std::shared_ptr<const ad::Arr> y, double tau);

// Mean Bernoulli negative log-likelihood of labels y01 under probabilities
// p, with p clamped to [1e-12, 1 - 1e-12].
ad::Var bernoulli_loss(ad::Tape& tape, ad::Var p, std::shared_ptr<const ad::Arr> y01);

}  // namespace evreg
