#pragma once

#include <string>
#include <vector>

#include "evreg/io.hpp"

namespace evreg {

/// Expands one named model form over a dataset's predictors. Fully linear /
/// spline / network forms use every predictor; mixed forms give the
/// interpreted predictors the linear or spline role (with per-surface linear
/// picks where a form splits them between both) and feed the complement to
/// the network. Base surfaces supply names, links, knot counts, penalties,
/// and layer stacks.
std::vector<SurfaceConfig> sweep_form_surfaces(
    const std::string& form, const std::vector<SurfaceConfig>& base,
    const std::vector<std::string>& all_predictors,
    const std::vector<std::string>& interpreted,
    const std::vector<std::vector<std::string>>& linear_pick);

/// Executes one configured run and writes every artifact into
/// config.out_dir: task outputs (reports, parameter and prediction tables,
/// curve files, checkpoints) and, last, manifest.json recording the config
/// echo, package version, seeds, and content hashes of all inputs and
/// outputs. Running the same config on the same inputs again reproduces
/// every artifact byte for byte. Returns the manifest path.
std::string run(const RunConfig& config);

}  // namespace evreg
