#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "evreg/layout.hpp"
#include "evreg/standardize.hpp"
#include "evreg/tape.hpp"

namespace evreg {

enum class Link { identity, exponential, logistic };
enum class LayerKind { dense, conv, recurrent };
enum class Activation { relu, identity };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int width = 0;
  Activation act = Activation::relu;
  int d1 = 1, d2 = 1;    // conv filter dims, odd
  int tau1 = 0, tau2 = 0;  // recurrent window
};

// One distribution-parameter surface: intercept plus linear, additive-spline,
// and network components over disjoint predictor subsets, pushed through a
// link. The network output layer is an implicit weight vector with no bias
// and no activation; the intercept carries the level.
struct SurfaceSpec {
  std::string name;
  std::vector<int> linear;
  std::vector<int> additive;
  int knots = 20;
  std::vector<double> lambda;  // empty = 0; one value = shared; else per additive predictor
  std::vector<int> net;
  std::vector<LayerSpec> layers;
  Link link = Link::identity;
};

struct ModelSpec {
  std::vector<SurfaceSpec> surfaces;
  // Adds one trainable scalar under a logistic link, shared across cells.
  bool shared_xi = false;
  double xi_init = 0.2;
};

// Named trainable parameter blocks plus their optimizer state. Block order is
// the construction order and is the canonical checkpoint order.
class ParamStore {
 public:
  struct Block {
    std::string name;
    Eigen::ArrayXXd value;
    struct Opt {
      Eigen::ArrayXXd m, v;
      std::int64_t t = 0;
    } opt;
  };

  int add(std::string name, Eigen::ArrayXXd init);
  Block& block(int i) { return blocks_[static_cast<std::size_t>(i)]; }
  const Block& block(int i) const { return blocks_[static_cast<std::size_t>(i)]; }
  int find(const std::string& name) const;  // -1 when absent
  int count() const { return static_cast<int>(blocks_.size()); }
  long total_size() const;
  void reset_opt();

 private:
  std::vector<Block> blocks_;
};

// The tape variables a built model exposes to a loss.
struct BuiltModel {
  std::vector<ad::Var> theta;  // per surface, n_valid x 1, link applied
  ad::Var xi;                  // 1x1 logistic output; valid iff shared_xi
  ad::Var penalty;             // scalar smoothing penalty (always valid, 0 when unpenalized)
  std::vector<ad::Var> leaves;  // one per ParamStore block, same order
};

// A model specification bound to a concrete dataset: standardization stats
// and knots are computed once over the given stat cells and frozen;
// standardized design matrices and penalty blocks are precomputed so every
// epoch's graph build touches no raw data.
//
// Layer stacks are validated to one of three shapes: all dense; a conv
// prefix (shared padded grid, odd filters) followed by dense; or a recurrent
// prefix (one shared window) followed by dense. A recurrent prefix restricts
// the cells the surface can produce, exposed through valid_cells().
class CompiledModel {
 public:
  // `X` holds raw predictors, one row per cell in layout order. `stat_cells`
  // are the rows used for stats and knots. `aux` (optional) restores frozen
  // stats/knots from a checkpoint instead of recomputing them.
  CompiledModel(ModelSpec spec, const Eigen::ArrayXXd& X, const GridLayout& layout,
                const std::vector<int>& stat_cells, const std::vector<std::string>& predictor_names,
                std::uint64_t init_seed, const std::vector<double>& intercept_init = {},
                const std::vector<std::pair<std::string, Eigen::ArrayXXd>>* aux = nullptr);

  BuiltModel build(ad::Tape& tape) const;

  // Evaluates all surfaces (and xi) with the current parameters, no autodiff
  // kept. Rows align with valid_cells().
  std::vector<Eigen::ArrayXd> eval_theta() const;
  double eval_xi() const;

  long count_params() const { return store_.total_size(); }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelSpec& spec() const { return spec_; }
  const GridLayout& layout() const { return layout_; }

  // Cells this model produces parameters for, in theta row order. Equals all
  // cells unless a recurrent stack trims window-invalid times.
  const std::vector<int>& valid_cells() const { return valid_cells_; }
  bool restricts_cells() const { return restricted_; }
  // theta row for a cell, -1 when the cell is outside the valid set.
  int theta_row(int cell) const { return row_of_cell_[static_cast<std::size_t>(cell)]; }

  // Additive component curve for one surface's additive predictor: the
  // fitted spline term evaluated at `x` with the frozen basis stats. Not
  // centered; callers subtract a reference value when comparing shapes.
  Eigen::ArrayXd spline_curve(int surface, int additive_pos, const Eigen::ArrayXd& x) const;
  // Knots for one surface's additive predictor.
  const Eigen::ArrayXd& knots(int surface, int additive_pos) const;

  // Frozen per-model arrays (stats, knots) for checkpointing, name -> array.
  std::vector<std::pair<std::string, Eigen::ArrayXXd>> aux_arrays() const;

 private:
  struct CompiledSurface {
    SurfaceSpec spec;
    ColumnStats lin_stats, net_stats, basis_stats;
    std::vector<Eigen::ArrayXd> knots;           // per additive predictor
    std::shared_ptr<const ad::Arr> XL, PSI, XN;  // standardized designs (null when unused)
    std::shared_ptr<const ad::Arr> S_lambda;     // assembled penalty matrix (null when unpenalized)
    std::shared_ptr<const ad::Arr> padded_maps;  // conv input, (T*P1*P2) x channels
    int P1 = 0, P2 = 0;                          // padded grid dims
    std::shared_ptr<const std::vector<int>> center_rows;  // padded row per cell
    // Parameter block ids.
    int b_intercept = -1, b_linear = -1, b_spline = -1, b_out = -1;
    struct LayerBlocks {
      int W = -1, b = -1, U = -1;  // U: recurrent state weights
    };
    std::vector<LayerBlocks> layer_blocks;
    int conv_prefix = 0;  // leading conv layer count
    int rec_prefix = 0;   // leading recurrent layer count
    int tau1 = 0, tau2 = 0;
  };

  void compile_surface(std::size_t idx, const Eigen::ArrayXXd& X, const std::vector<int>& stat_cells,
                       const std::vector<std::string>& names, double intercept_init,
                       const std::vector<std::pair<std::string, Eigen::ArrayXXd>>* aux, std::uint64_t seed);
  ad::Var build_surface(ad::Tape& tape, const CompiledSurface& cs, const std::vector<ad::Var>& leaves) const;

  ModelSpec spec_;
  GridLayout layout_;
  ParamStore store_;
  std::vector<CompiledSurface> surfaces_;
  int b_xi_ = -1;
  std::vector<int> valid_cells_;
  std::vector<int> row_of_cell_;
  int tau1_max_ = 0, tau2_max_ = 0;  // widest recurrent window across surfaces
  bool restricted_ = false;
  std::shared_ptr<const ad::Arr> ones_;  // n_valid x 1
};

// Layer-stack parameter arithmetic without compiling data: the count a
// surface contributes (intercept + linear + spline weights + layer
// weights/biases + output weights).
long surface_param_count(const SurfaceSpec& spec);
long model_param_count(const ModelSpec& spec);

}  // namespace evreg
