#include "evreg/surface.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "evreg/rng.hpp"
#include "evreg/spline.hpp"

namespace evreg {

namespace {

using ad::Arr;
using ad::Tape;
using ad::Var;

Arr glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double b = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Arr out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = rng.uniform(-b, b);
  return out;
}

Eigen::ArrayXXd gather(const Eigen::ArrayXXd& X, const std::vector<int>& rows, const std::vector<int>& cols) {
  Eigen::ArrayXXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X(rows[i], cols[j]);
  return out;
}

Eigen::ArrayXXd take_cols(const Eigen::ArrayXXd& X, const std::vector<int>& cols) {
  Eigen::ArrayXXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
  return out;
}

std::vector<std::string> pick_names(const std::vector<std::string>& names, const std::vector<int>& idx) {
  std::vector<std::string> out;
  for (int i : idx)
    out.push_back(static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)]
                                                             : "x" + std::to_string(i + 1));
  return out;
}

const Eigen::ArrayXXd* find_aux(const std::vector<std::pair<std::string, Eigen::ArrayXXd>>* aux,
                                const std::string& name) {
  if (!aux) return nullptr;
  for (const auto& [k, v] : *aux)
    if (k == name) return &v;
  return nullptr;
}

ColumnStats stats_from_aux_or_data(const std::vector<std::pair<std::string, Eigen::ArrayXXd>>* aux,
                                   const std::string& prefix, const Eigen::ArrayXXd& train_block,
                                   const std::vector<std::string>& names) {
  if (const Eigen::ArrayXXd* m = find_aux(aux, prefix + ".mean")) {
    const Eigen::ArrayXXd* s = find_aux(aux, prefix + ".sd");
    if (!s) throw std::invalid_argument("checkpoint aux missing " + prefix + ".sd");
    ColumnStats st;
    st.mean = m->row(0).transpose();
    st.sd = s->row(0).transpose();
    return st;
  }
  return column_stats(train_block, names);
}

}  // namespace

int ParamStore::add(std::string name, Eigen::ArrayXXd init) {
  Block b;
  b.name = std::move(name);
  b.value = std::move(init);
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return static_cast<int>(i);
  return -1;
}

long ParamStore::total_size() const {
  long n = 0;
  for (const Block& b : blocks_) n += static_cast<long>(b.value.size());
  return n;
}

void ParamStore::reset_opt() {
  for (Block& b : blocks_) {
    b.opt.m.resize(0, 0);
    b.opt.v.resize(0, 0);
    b.opt.t = 0;
  }
}

long surface_param_count(const SurfaceSpec& spec) {
  long n = 1;  // intercept
  n += static_cast<long>(spec.linear.size());
  n += static_cast<long>(spec.additive.size()) * spec.knots;
  if (!spec.net.empty()) {
    long width_in = static_cast<long>(spec.net.size());
    for (const LayerSpec& l : spec.layers) {
      if (l.kind == LayerKind::conv) {
        n += static_cast<long>(l.d1) * l.d2 * width_in * l.width + l.width;
      } else if (l.kind == LayerKind::recurrent) {
        n += width_in * l.width + static_cast<long>(l.width) * l.width + l.width;
      } else {
        n += width_in * l.width + l.width;
      }
      width_in = l.width;
    }
    n += width_in;  // output weights, no bias
  }
  return n;
}

long model_param_count(const ModelSpec& spec) {
  long n = spec.shared_xi ? 1 : 0;
  for (const SurfaceSpec& s : spec.surfaces) n += surface_param_count(s);
  return n;
}

CompiledModel::CompiledModel(ModelSpec spec, const Eigen::ArrayXXd& X, const GridLayout& layout,
                             const std::vector<int>& stat_cells, const std::vector<std::string>& predictor_names,
                             std::uint64_t init_seed, const std::vector<double>& intercept_init,
                             const std::vector<std::pair<std::string, Eigen::ArrayXXd>>* aux)
    : spec_(std::move(spec)), layout_(layout) {
  if (X.rows() != layout_.n_cells()) throw std::invalid_argument("CompiledModel: X rows != layout cells");
  if (stat_cells.size() < 2) throw std::invalid_argument("CompiledModel: need at least 2 stat cells");

  // The valid cell set is shared across surfaces: intersect the recurrent
  // window restrictions.
  int tau1_max = 0, tau2_max = 0;
  for (const SurfaceSpec& s : spec_.surfaces)
    for (const LayerSpec& l : s.layers)
      if (l.kind == LayerKind::recurrent) {
        tau1_max = std::max(tau1_max, l.tau1);
        tau2_max = std::max(tau2_max, l.tau2);
      }
  if (tau1_max + tau2_max + 1 > layout_.n_times)
    throw std::invalid_argument("CompiledModel: time series shorter than the recurrent window");
  tau1_max_ = tau1_max;
  tau2_max_ = tau2_max;
  restricted_ = tau1_max > 0 || tau2_max > 0;
  const int S = layout_.n_sites();
  row_of_cell_.assign(static_cast<std::size_t>(layout_.n_cells()), -1);
  for (int t = tau1_max; t < layout_.n_times - tau2_max; ++t)
    for (int s = 0; s < S; ++s) {
      row_of_cell_[static_cast<std::size_t>(t) * S + s] = static_cast<int>(valid_cells_.size());
      valid_cells_.push_back(t * S + s);
    }
  ones_ = std::make_shared<const Arr>(Arr::Ones(static_cast<Eigen::Index>(valid_cells_.size()), 1));

  surfaces_.resize(spec_.surfaces.size());
  for (std::size_t i = 0; i < spec_.surfaces.size(); ++i) {
    const double ic = i < intercept_init.size() ? intercept_init[i] : 0.0;
    compile_surface(i, X, stat_cells, predictor_names, ic, aux, derive_seed(init_seed, i));
  }
  if (spec_.shared_xi) {
    const double p = spec_.xi_init;
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("CompiledModel: xi_init outside (0,1)");
    b_xi_ = store_.add("xi", Arr::Constant(1, 1, std::log(p / (1.0 - p))));
  }
}

void CompiledModel::compile_surface(std::size_t idx, const Eigen::ArrayXXd& X, const std::vector<int>& stat_cells,
                                    const std::vector<std::string>& names, double intercept_init,
                                    const std::vector<std::pair<std::string, Eigen::ArrayXXd>>* aux,
                                    std::uint64_t seed) {
  CompiledSurface& cs = surfaces_[idx];
  cs.spec = spec_.surfaces[idx];
  const SurfaceSpec& sp = cs.spec;
  if (sp.name.empty()) throw std::invalid_argument("SurfaceSpec: name required");

  const int d = static_cast<int>(X.cols());
  std::set<int> seen;
  for (const std::vector<int>* grp : {&sp.linear, &sp.additive, &sp.net})
    for (int j : *grp) {
      if (j < 0 || j >= d) throw std::invalid_argument(sp.name + ": predictor index out of range");
      if (!seen.insert(j).second) throw std::invalid_argument(sp.name + ": predictor index reused across components");
    }

  // Layer stack shape: dense-only, conv prefix + dense, or recurrent prefix
  // (one shared window) + dense.
  bool past_prefix = false;
  for (const LayerSpec& l : sp.layers) {
    if (l.width < 1) throw std::invalid_argument(sp.name + ": layer width must be positive");
    if (l.kind == LayerKind::dense) {
      past_prefix = true;
      continue;
    }
    if (past_prefix) throw std::invalid_argument(sp.name + ": conv/recurrent layers must precede dense layers");
    if (l.kind == LayerKind::conv) {
      if (cs.rec_prefix > 0) throw std::invalid_argument(sp.name + ": cannot mix conv and recurrent layers");
      if (l.d1 % 2 == 0 || l.d2 % 2 == 0) throw std::invalid_argument(sp.name + ": conv filter dims must be odd");
      if (l.d1 > layout_.d1 || l.d2 > layout_.d2)
        throw std::invalid_argument(sp.name + ": conv filter larger than the spatial grid");
      ++cs.conv_prefix;
    } else {
      if (cs.conv_prefix > 0) throw std::invalid_argument(sp.name + ": cannot mix conv and recurrent layers");
      if (l.tau1 < 0 || l.tau2 < 0) throw std::invalid_argument(sp.name + ": negative recurrent window");
      if (cs.rec_prefix > 0 && (l.tau1 != cs.tau1 || l.tau2 != cs.tau2))
        throw std::invalid_argument(sp.name + ": stacked recurrent layers must share one window");
      cs.tau1 = l.tau1;
      cs.tau2 = l.tau2;
      ++cs.rec_prefix;
    }
  }
  if (sp.net.empty() != sp.layers.empty())
    throw std::invalid_argument(sp.name + ": network predictors and layers must be specified together");
  if (!sp.additive.empty() && sp.knots < 1) throw std::invalid_argument(sp.name + ": knots must be positive");
  if (!sp.lambda.empty() && sp.lambda.size() != 1 && sp.lambda.size() != sp.additive.size())
    throw std::invalid_argument(sp.name + ": lambda must be empty, one value, or one per additive predictor");

  // Linear component.
  if (!sp.linear.empty()) {
    cs.lin_stats = stats_from_aux_or_data(aux, sp.name + ".lin", gather(X, stat_cells, sp.linear),
                                          pick_names(names, sp.linear));
    cs.XL = std::make_shared<const Arr>(apply_stats(take_cols(X, sp.linear), cs.lin_stats));
  }

  // Additive component: knots and basis standardization frozen on stat cells.
  if (!sp.additive.empty()) {
    const int k = sp.knots;
    Eigen::ArrayXXd raw(X.rows(), static_cast<Eigen::Index>(sp.additive.size()) * k);
    Eigen::ArrayXXd raw_train(static_cast<Eigen::Index>(stat_cells.size()),
                              static_cast<Eigen::Index>(sp.additive.size()) * k);
    for (std::size_t a = 0; a < sp.additive.size(); ++a) {
      const std::string kname = sp.name + ".knots." + std::to_string(a);
      if (const Eigen::ArrayXXd* kn = find_aux(aux, kname)) {
        cs.knots.push_back(kn->col(0));
      } else {
        Eigen::ArrayXd train_vals(static_cast<Eigen::Index>(stat_cells.size()));
        for (std::size_t i = 0; i < stat_cells.size(); ++i)
          train_vals(static_cast<Eigen::Index>(i)) = X(stat_cells[i], sp.additive[a]);
        cs.knots.push_back(spline_knots(train_vals, k));
      }
      const Eigen::ArrayXXd cols = spline_basis(X.col(sp.additive[a]), cs.knots.back());
      raw.middleCols(static_cast<Eigen::Index>(a) * k, k) = cols;
      for (std::size_t i = 0; i < stat_cells.size(); ++i)
        raw_train.row(static_cast<Eigen::Index>(i)).segment(static_cast<Eigen::Index>(a) * k, k) =
            cols.row(stat_cells[i]);
    }
    cs.basis_stats = stats_from_aux_or_data(aux, sp.name + ".basis", raw_train, {});
    cs.PSI = std::make_shared<const Arr>(apply_stats(raw, cs.basis_stats));

    // Assembled penalty: block-diagonal lambda_a * psi(knot_j, knot_l).
    bool any = false;
    for (double l : sp.lambda) any = any || l > 0.0;
    if (any) {
      Arr S = Arr::Zero(raw.cols(), raw.cols());
      for (std::size_t a = 0; a < sp.additive.size(); ++a) {
        const double lam = sp.lambda.size() == 1 ? sp.lambda[0] : sp.lambda[a];
        S.block(static_cast<Eigen::Index>(a) * k, static_cast<Eigen::Index>(a) * k, k, k) =
            lam * spline_penalty_matrix(cs.knots[a]);
      }
      cs.S_lambda = std::make_shared<const Arr>(std::move(S));
    }
  }

  // Network component.
  if (!sp.net.empty()) {
    cs.net_stats = stats_from_aux_or_data(aux, sp.name + ".net", gather(X, stat_cells, sp.net),
                                          pick_names(names, sp.net));
    const Eigen::ArrayXXd XNs = apply_stats(take_cols(X, sp.net), cs.net_stats);
    if (cs.conv_prefix > 0) {
      // One padded grid for the whole stack, sized by the largest filters;
      // the border holds standardized zeros.
      int m1 = 1, m2 = 1;
      for (int j = 0; j < cs.conv_prefix; ++j) {
        m1 = std::max(m1, sp.layers[static_cast<std::size_t>(j)].d1);
        m2 = std::max(m2, sp.layers[static_cast<std::size_t>(j)].d2);
      }
      cs.P1 = layout_.d1 + m1 - 1;
      cs.P2 = layout_.d2 + m2 - 1;
      const int off1 = (m1 - 1) / 2, off2 = (m2 - 1) / 2;
      const long PS = static_cast<long>(cs.P1) * cs.P2;
      Arr padded = Arr::Zero(PS * layout_.n_times, XNs.cols());
      auto centers = std::make_shared<std::vector<int>>();
      centers->reserve(static_cast<std::size_t>(layout_.n_cells()));
      for (int t = 0; t < layout_.n_times; ++t)
        for (int r = 0; r < layout_.d1; ++r)
          for (int c = 0; c < layout_.d2; ++c) {
            const long prow = t * PS + static_cast<long>(r + off1) * cs.P2 + (c + off2);
            padded.row(prow) = XNs.row(layout_.cell(t, r, c));
            centers->push_back(static_cast<int>(prow));
          }
      cs.padded_maps = std::make_shared<const Arr>(std::move(padded));
      cs.center_rows = std::move(centers);
    }
    cs.XN = std::make_shared<const Arr>(XNs);
  }

  // Parameter blocks. Construction order is the checkpoint order.
  Rng rng(seed);
  cs.b_intercept = store_.add(sp.name + ".intercept", Arr::Constant(1, 1, intercept_init));
  if (!sp.linear.empty())
    cs.b_linear = store_.add(sp.name + ".linear", Arr::Zero(static_cast<Eigen::Index>(sp.linear.size()), 1));
  if (!sp.additive.empty())
    cs.b_spline =
        store_.add(sp.name + ".spline", Arr::Zero(static_cast<Eigen::Index>(sp.additive.size()) * sp.knots, 1));
  if (!sp.net.empty()) {
    long width_in = static_cast<long>(sp.net.size());
    for (std::size_t j = 0; j < sp.layers.size(); ++j) {
      const LayerSpec& l = sp.layers[j];
      CompiledSurface::LayerBlocks lb;
      const std::string base = sp.name + ".layer" + std::to_string(j);
      if (l.kind == LayerKind::conv) {
        lb.W = store_.add(base + ".W", glorot(static_cast<Eigen::Index>(l.d1) * l.d2 * width_in, l.width, rng));
      } else {
        lb.W = store_.add(base + ".W", glorot(width_in, l.width, rng));
        if (l.kind == LayerKind::recurrent) lb.U = store_.add(base + ".U", glorot(l.width, l.width, rng));
      }
      lb.b = store_.add(base + ".b", Arr::Zero(1, l.width));
      cs.layer_blocks.push_back(lb);
      width_in = l.width;
    }
    cs.b_out = store_.add(sp.name + ".out", glorot(width_in, 1, rng));
  }
}

ad::Var CompiledModel::build_surface(Tape& tape, const CompiledSurface& cs, const std::vector<Var>& leaves) const {
  const SurfaceSpec& sp = cs.spec;
  const int S = layout_.n_sites();
  std::vector<Var> all_cell_terms;

  if (cs.XL) all_cell_terms.push_back(tape.matmul(tape.constant_ref(cs.XL), leaves[static_cast<std::size_t>(cs.b_linear)]));
  if (cs.PSI) all_cell_terms.push_back(tape.matmul(tape.constant_ref(cs.PSI), leaves[static_cast<std::size_t>(cs.b_spline)]));

  Var net_term;      // aligned to all cells
  Var net_term_valid;  // aligned to valid cells (recurrent path)
  if (!sp.net.empty()) {
    auto act = [&](Var v, Activation a) { return a == Activation::relu ? tape.relu(v) : v; };
    std::size_t j = 0;
    Var h;
    if (cs.conv_prefix > 0) {
      const long PS = static_cast<long>(cs.P1) * cs.P2;
      Var maps = tape.constant_ref(cs.padded_maps);
      for (; j < static_cast<std::size_t>(cs.conv_prefix); ++j) {
        const LayerSpec& l = sp.layers[j];
        std::vector<Var> per_time;
        for (int t = 0; t < layout_.n_times; ++t) {
          auto rows = std::make_shared<std::vector<int>>();
          rows->reserve(static_cast<std::size_t>(PS));
          for (long r = 0; r < PS; ++r) rows->push_back(static_cast<int>(t * PS + r));
          per_time.push_back(tape.im2col(tape.gather_rows(maps, std::move(rows)), cs.P1, cs.P2, l.d1, l.d2));
        }
        Var z = layout_.n_times == 1 ? per_time[0] : tape.concat_rows(per_time);
        const CompiledSurface::LayerBlocks& lb = cs.layer_blocks[j];
        Var pre = tape.affine(z, leaves[static_cast<std::size_t>(lb.W)], leaves[static_cast<std::size_t>(lb.b)]);
        maps = act(pre, l.act);
      }
      h = tape.gather_rows(maps, cs.center_rows);
    } else if (cs.rec_prefix > 0) {
      // Unroll the shared window once per valid target time; the state is
      // zero at the window start and the output is read at the window end.
      Var xv = tape.constant_ref(cs.XN);
      std::vector<Var> zero_state;
      for (int l = 0; l < cs.rec_prefix; ++l)
        zero_state.push_back(tape.constant(Arr::Zero(S, sp.layers[static_cast<std::size_t>(l)].width)));
      // Target times are the shared valid range, which can be narrower than
      // this surface's own window when another surface looks further.
      std::vector<Var> per_target;
      for (int t = tau1_max_; t < layout_.n_times - tau2_max_; ++t) {
        std::vector<Var> state = zero_state;
        for (int ts = t - cs.tau1; ts <= t + cs.tau2; ++ts) {
          auto rows = std::make_shared<std::vector<int>>();
          rows->reserve(static_cast<std::size_t>(S));
          for (int s = 0; s < S; ++s) rows->push_back(ts * S + s);
          Var in = tape.gather_rows(xv, std::move(rows));
          for (int l = 0; l < cs.rec_prefix; ++l) {
            const CompiledSurface::LayerBlocks& lb = cs.layer_blocks[static_cast<std::size_t>(l)];
            Var pre = tape.add(
                tape.affine(in, leaves[static_cast<std::size_t>(lb.W)], leaves[static_cast<std::size_t>(lb.b)]),
                tape.matmul(state[static_cast<std::size_t>(l)], leaves[static_cast<std::size_t>(lb.U)]));
            state[static_cast<std::size_t>(l)] = act(pre, sp.layers[static_cast<std::size_t>(l)].act);
            in = state[static_cast<std::size_t>(l)];
          }
        }
        per_target.push_back(state.back());
      }
      h = per_target.size() == 1 ? per_target[0] : tape.concat_rows(per_target);
      j = static_cast<std::size_t>(cs.rec_prefix);
    } else {
      h = tape.constant_ref(cs.XN);
    }
    for (; j < sp.layers.size(); ++j) {
      const LayerSpec& l = sp.layers[j];
      const CompiledSurface::LayerBlocks& lb = cs.layer_blocks[j];
      Var w = leaves[static_cast<std::size_t>(lb.W)];
      Var b = leaves[static_cast<std::size_t>(lb.b)];
      h = (l.act == Activation::relu) ? tape.affine_relu(h, w, b) : tape.affine(h, w, b);
    }
    Var out = tape.matmul(h, leaves[static_cast<std::size_t>(cs.b_out)]);
    if (cs.rec_prefix > 0)
      net_term_valid = out;
    else
      net_term = out;
  }

  if (net_term.valid()) all_cell_terms.push_back(net_term);

  Var pred;
  if (!all_cell_terms.empty()) {
    Var sum = all_cell_terms[0];
    for (std::size_t i = 1; i < all_cell_terms.size(); ++i) sum = tape.add(sum, all_cell_terms[i]);
    if (restricted_) {
      auto rows = std::make_shared<std::vector<int>>(valid_cells_);
      sum = tape.gather_rows(sum, std::move(rows));
    }
    pred = sum;
  }
  if (net_term_valid.valid()) pred = pred.valid() ? tape.add(pred, net_term_valid) : net_term_valid;

  Var eta0 = leaves[static_cast<std::size_t>(cs.b_intercept)];
  pred = pred.valid() ? tape.add(pred, eta0) : tape.matmul(tape.constant_ref(ones_), eta0);

  switch (sp.link) {
    case Link::identity:
      return pred;
    case Link::exponential:
      return tape.exp(tape.clamp_max(pred, 690.0));
    case Link::logistic:
      return tape.sigmoid(pred);
  }
  throw std::logic_error("unreachable");
}

BuiltModel CompiledModel::build(Tape& tape) const {
  BuiltModel out;
  out.leaves.reserve(static_cast<std::size_t>(store_.count()));
  for (int i = 0; i < store_.count(); ++i) out.leaves.push_back(tape.leaf(store_.block(i).value));

  for (const CompiledSurface& cs : surfaces_) out.theta.push_back(build_surface(tape, cs, out.leaves));

  if (b_xi_ >= 0) out.xi = tape.sigmoid(out.leaves[static_cast<std::size_t>(b_xi_)]);

  Var pen;
  for (const CompiledSurface& cs : surfaces_) {
    if (!cs.S_lambda) continue;
    Var w = out.leaves[static_cast<std::size_t>(cs.b_spline)];
    Var term = tape.scale_shift(tape.reduce_sum(tape.mul(w, tape.matmul(tape.constant_ref(cs.S_lambda), w))), 0.5, 0.0);
    pen = pen.valid() ? tape.add(pen, term) : term;
  }
  out.penalty = pen.valid() ? pen : tape.constant(0.0);
  return out;
}

std::vector<Eigen::ArrayXd> CompiledModel::eval_theta() const {
  Tape tape;
  BuiltModel bm = build(tape);
  std::vector<Eigen::ArrayXd> out;
  for (Var v : bm.theta) out.push_back(tape.val(v).col(0));
  return out;
}

double CompiledModel::eval_xi() const {
  if (b_xi_ < 0) throw std::logic_error("eval_xi: model has no shared shape parameter");
  const double raw = store_.block(b_xi_).value(0, 0);
  return 1.0 / (1.0 + std::exp(-raw));
}

Eigen::ArrayXd CompiledModel::spline_curve(int surface, int additive_pos, const Eigen::ArrayXd& x) const {
  const CompiledSurface& cs = surfaces_[static_cast<std::size_t>(surface)];
  const int k = cs.spec.knots;
  const Eigen::ArrayXd& kn = cs.knots[static_cast<std::size_t>(additive_pos)];
  const Eigen::ArrayXXd raw = spline_basis(x, kn);
  const Eigen::ArrayXXd& w = store_.block(cs.b_spline).value;
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(x.size());
  const Eigen::Index base = static_cast<Eigen::Index>(additive_pos) * k;
  for (Eigen::Index j = 0; j < k; ++j)
    out += (raw.col(j) - cs.basis_stats.mean(base + j)) / cs.basis_stats.sd(base + j) * w(base + j, 0);
  return out;
}

const Eigen::ArrayXd& CompiledModel::knots(int surface, int additive_pos) const {
  return surfaces_[static_cast<std::size_t>(surface)].knots[static_cast<std::size_t>(additive_pos)];
}

std::vector<std::pair<std::string, Eigen::ArrayXXd>> CompiledModel::aux_arrays() const {
  std::vector<std::pair<std::string, Eigen::ArrayXXd>> out;
  auto push_stats = [&](const std::string& prefix, const ColumnStats& st) {
    if (st.mean.size() == 0) return;
    out.emplace_back(prefix + ".mean", st.mean.transpose());
    out.emplace_back(prefix + ".sd", st.sd.transpose());
  };
  for (const CompiledSurface& cs : surfaces_) {
    push_stats(cs.spec.name + ".lin", cs.lin_stats);
    push_stats(cs.spec.name + ".basis", cs.basis_stats);
    push_stats(cs.spec.name + ".net", cs.net_stats);
    for (std::size_t a = 0; a < cs.knots.size(); ++a)
      out.emplace_back(cs.spec.name + ".knots." + std::to_string(a), Eigen::ArrayXXd(cs.knots[a]));
  }
  return out;
}

}  // namespace evreg
