#pragma once

// Fitting orchestration: full-batch Adam with strided save-on-improvement
// checkpoints, divergence handling, warm starting, threshold estimation, and
// checkpoint persistence.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "evreg/adam.hpp"
#include "evreg/surface.hpp"
#include "evreg/tape.hpp"

namespace evreg {

/// Which loss decides whether a strided state beats the saved one.
enum class Selection { training_loss, validation_loss };

struct FitConfig {
  int epochs = 10000;
  /// Save-check cadence in epochs. 1 turns every epoch into a candidate,
  /// which is the best-by-validation mode used with validation selection.
  int stride = 50;
  AdamConfig adam{};
  std::uint64_t seed = 0;  ///< provenance only; the full-batch loop draws nothing
  Selection selection = Selection::training_loss;

  void validate() const;
};

/// Training loss builder: given a fresh tape and the built model, returns the
/// scalar objective to minimize (penalty included by the caller's closure).
using LossFn = std::function<ad::Var(ad::Tape&, const BuiltModel&)>;

/// Validation criterion evaluated at the model's current parameters, no
/// gradients. Required when selection is validation_loss.
using EvalFn = std::function<double()>;

struct FitReport {
  /// Entry k is the training loss of the state after k update steps; the
  /// last entry belongs to the final state (or the divergent one).
  std::vector<double> train_loss;
  /// Same alignment as train_loss; empty when no validator was supplied.
  std::vector<double> valid_loss;
  std::vector<std::int64_t> saved_epochs;
  /// Criterion value at each save; strictly decreasing after the first.
  std::vector<double> saved_losses;
  std::int64_t best_epoch = 0;
  double best_loss = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  std::int64_t divergence_epoch = -1;
};

/// Trained state at a save point: named parameter blocks with optimizer
/// moments, the frozen per-model arrays (standardization stats, knots), the
/// epoch and criterion loss of the save, and the architecture fingerprint.
struct Checkpoint {
  struct Block {
    std::string name;
    Eigen::ArrayXXd value;
    Eigen::ArrayXXd m, v;  ///< empty when t == 0
    std::int64_t t = 0;
  };
  std::vector<Block> blocks;
  std::vector<std::pair<std::string, Eigen::ArrayXXd>> aux;
  std::int64_t epoch = 0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::string fingerprint;
};

struct FitResult {
  FitReport report;
  Checkpoint checkpoint;
};

/// Hash of the model's architecture: block and frozen-array names and shapes.
/// Data values do not enter, so models built on different data agree iff
/// their trainable structure matches.
std::string model_fingerprint(const CompiledModel& model);

/// Full-batch Adam loop. Each epoch builds one graph, backpropagates, and
/// steps every parameter block. The initial state is always saved; at every
/// stride-th epoch (and at the final one when it lands on the stride) the
/// state is saved iff its criterion improves on the last save. On return the
/// model holds the last saved state, which the checkpoint mirrors.
///
/// Errors: non-finite training loss at initialization throws; a non-finite
/// training loss later marks divergence, restores the last save, and returns.
/// Exceptions thrown by the loss itself (e.g. a support violation under an
/// unblended likelihood) propagate to the caller.
FitResult fit(CompiledModel& model, const LossFn& train_loss,
              const EvalFn& valid_loss, const FitConfig& cfg);

/// Copies checkpoint parameters into a freshly built model and resets the
/// optimizer state. The architecture fingerprints must match. To keep the
/// copied weights meaningful, build the model with the checkpoint's aux
/// arrays so standardization stats and knots are carried over, not refit.
void warm_start(CompiledModel& model, const Checkpoint& ckpt);

/// Persistence: a line-oriented text envelope (fingerprint, epoch, loss as a
/// hex float, block and aux names with shapes) followed by a flat binary
/// payload of little-endian 64-bit doubles. load(save(c)) is bitwise exact.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Pre-link intercept values so each surface's link initially outputs a
/// neutral summary of the responses: identity -> median, exponential ->
/// interquartile range (floored away from zero), logistic -> mean frequency.
std::vector<double> default_intercept_init(const ModelSpec& spec,
                                           const Eigen::ArrayXd& y);

/// Quantile-regression threshold: fits the given model by the mean tilted
/// loss at level p_u over fit_cells (responses indexed by cell id), then
/// evaluates the fitted quantile surface on every valid cell. The returned
/// grid aligns with model.valid_cells(); exceedances among fit_cells come
/// out near the 1 - p_u fraction.
struct ThresholdResult {
  Eigen::ArrayXd u;
  FitResult fit;
};
ThresholdResult estimate_threshold(CompiledModel& model,
                                   const Eigen::ArrayXd& y_cells,
                                   const std::vector<int>& fit_cells,
                                   double p_u, const FitConfig& cfg);

}  // namespace evreg
