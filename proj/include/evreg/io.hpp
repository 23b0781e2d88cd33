#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evreg/bootstrap.hpp"
#include "evreg/evt.hpp"
#include "evreg/simgen.hpp"
#include "evreg/surface.hpp"
#include "evreg/train.hpp"

namespace evreg {

/// Package version stamped into every manifest.
inline constexpr const char* kVersion = "1.0.0";

/// One parameter surface declared by predictor names; resolved against a
/// dataset header when the run starts.
struct SurfaceConfig {
  std::string name;
  std::string link = "identity";
  std::vector<std::string> linear;
  std::vector<std::string> additive;
  int knots = 20;
  std::vector<double> lambda;
  std::vector<std::string> net;
  std::vector<LayerSpec> layers;
};

/// Space-time cross-validation plan: correlation-clustered folds with one
/// fold held out during fitting.
struct FoldConfig {
  bool enabled = false;
  int k = 5;
  std::uint64_t seed = 1;
  int block_len = 9;
  int validation_fold = 0;
};

/// Random holdout over observed cells, the split used on synthetic data.
struct SplitConfig {
  bool enabled = false;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

struct MetricConfig {
  double stls_p = 0.99;
  double smad_p1 = 0.95;
  bool twcrps = true;
};

/// Sweep over exactly one axis: model forms, exceedance probabilities, or
/// network layer stacks.
struct SweepConfig {
  bool enabled = false;
  /// Of: linear, gam, nn, linear+gam, linear+nn, gam+nn, linear+gam+nn.
  std::vector<std::string> forms;
  /// Predictors eligible for linear or spline terms in mixed forms; the
  /// network covers the complement.
  std::vector<std::string> interpreted;
  /// Per surface, the interpreted predictors kept linear when a form splits
  /// them between linear and spline parts.
  std::vector<std::vector<std::string>> linear_pick;
  std::vector<double> p_u;
  std::vector<std::pair<std::string, std::vector<LayerSpec>>> architectures;
};

struct RunConfig {
  /// simulate | occurrence | threshold | bgev_pp | score | predict |
  /// bootstrap | sweep | gradcheck.
  std::string task;
  std::string dataset;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int workers = 1;
  /// Response is square-rooted at ingestion and squared (after clamping
  /// negative values to zero) when predictions are reported.
  bool sqrt_response = false;

  // Point-process context.
  double n_y = 1.0;
  double p_u = 0.8;
  evt::PpVariant variant = evt::PpVariant::bgev;
  evt::BgevConfig blend{};

  // Model.
  bool shared_xi = true;
  double xi_init = 0.2;
  std::vector<SurfaceConfig> surfaces;

  FitConfig train{};
  /// Threshold pre-fit; the surface defaults to the location surface's
  /// structure under an identity link when none is declared.
  FitConfig threshold_train{};
  std::vector<SurfaceConfig> threshold_surface;  // 0 or 1 entries

  FoldConfig folds{};
  SplitConfig split{};
  BootstrapPlan bootstrap{};
  MetricConfig metrics{};
  std::vector<double> pred_quantiles = {0.5, 0.95, 0.99};

  ScenarioSpec scenario{};  ///< simulate task; study size/seed echo in manifests
  SweepConfig sweep{};
  std::string checkpoint_in;   ///< fitted-model input for predict/score
  std::string threshold_in;    ///< frozen threshold table for predict/score

  /// Structural checks that need no dataset; throws std::runtime_error
  /// naming the offending field.
  void validate() const;
};

/// Strict JSON decode: unknown keys, wrong types, and bad enum spellings are
/// errors naming the key. The result is validated.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Canonical echo of a config: parse_run_config(config_echo(c)) reproduces c,
/// and equal configs produce identical bytes.
std::string config_echo(const RunConfig& c);

Link link_from_name(const std::string& name);
const char* link_name(Link link);
Study study_from_name(const std::string& name);
const char* study_name(Study s);

/// Name -> column resolution against a dataset header; errors name the
/// missing predictor and the surface that wants it.
SurfaceSpec resolve_surface(const SurfaceConfig& sc,
                            const std::vector<std::string>& predictor_names);
ModelSpec resolve_model(const RunConfig& c,
                        const std::vector<std::string>& predictor_names);

}  // namespace evreg
