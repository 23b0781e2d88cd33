#include "evreg/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <thread>
#include <utility>

#include "evreg/dataset.hpp"
#include "evreg/folds.hpp"
#include "evreg/gradcheck.hpp"
#include "evreg/hash.hpp"
#include "evreg/metrics.hpp"
#include "evreg/objectives.hpp"
#include "evreg/rng.hpp"
#include "evreg/special.hpp"
#include "evreg/stats.hpp"
#include "evreg/textio.hpp"
#include "evreg/train.hpp"
#include "json.hpp"

namespace evreg {
namespace {

using json = nlohmann::json;
using Eigen::ArrayXd;
using Eigen::ArrayXXd;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("run: " + msg);
}

std::string hash_bytes(const std::string& bytes) { return hex64(fnv1a64(bytes)); }

// Collects run outputs: every artifact is written atomically and its content
// hash recorded for the manifest.
struct Artifacts {
  std::string dir;
  std::map<std::string, std::string> hashes;

  std::string path(const std::string& name) const { return dir + "/" + name; }

  void write(const std::string& name, const std::string& content) {
    atomic_write_text(path(name), content);
    hashes[name] = hash_bytes(content);
  }

  // For files written by lower-level savers (checkpoints, datasets).
  void note(const std::string& name) {
    hashes[name] = hash_bytes(read_text_file(path(name)));
  }
};

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve((std::size_t)workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Data loading and holdout partitioning.

struct Prepared {
  GridDataset d;
  ArrayXd y;  // model-scale responses (square-rooted when configured)
  std::vector<int> observed, train_cells, valid_cells;
};

Prepared prepare(const RunConfig& c, bool need_observations = true) {
  Prepared p;
  p.d = load_dataset(c.dataset);
  p.y = p.d.y;
  if (c.sqrt_response) {
    for (long k = 0; k < p.y.size(); ++k) {
      if (p.d.mask[(std::size_t)k]) continue;
      if (p.y(k) < 0.0)
        fail("square-root response transform needs non-negative responses");
      p.y(k) = std::sqrt(p.y(k));
    }
  }
  p.observed = p.d.observed_cells();
  if (need_observations && p.observed.empty())
    fail("dataset has no observed responses");
  if (c.folds.enabled) {
    FoldPlan plan = make_cv_folds(p.d.site_coords(), p.d.layout, p.observed,
                                  c.folds.k, c.folds.seed, c.folds.block_len);
    p.valid_cells = plan.fold_cells(c.folds.validation_fold + 1);
    p.train_cells = plan.complement_cells(c.folds.validation_fold + 1);
  } else if (c.split.enabled) {
    std::vector<int> cells = p.observed;
    Rng rng(derive_seed(c.split.seed, 77));
    for (std::size_t i = cells.size(); i > 1; --i)
      std::swap(cells[i - 1], cells[(std::size_t)rng.below((std::uint64_t)i)]);
    long n_train = std::llround(c.split.train_fraction * (double)cells.size());
    n_train = std::max<long>(1, std::min<long>((long)cells.size() - 1, n_train));
    p.train_cells.assign(cells.begin(), cells.begin() + n_train);
    p.valid_cells.assign(cells.begin() + n_train, cells.end());
    std::sort(p.train_cells.begin(), p.train_cells.end());
    std::sort(p.valid_cells.begin(), p.valid_cells.end());
  } else {
    p.train_cells = p.observed;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Point-process pieces.

PpData make_pp_data(const CompiledModel& m, const ArrayXd& y, const ArrayXd& u_cells,
                    const std::vector<int>& cells, double n_y) {
  auto obs = std::make_shared<std::vector<int>>();
  auto exc = std::make_shared<std::vector<int>>();
  std::vector<double> uv, yv;
  for (int cell : cells) {
    const int r = m.theta_row(cell);
    if (r < 0 || !std::isfinite(u_cells(cell)) || !std::isfinite(y(cell))) continue;
    obs->push_back(r);
    uv.push_back(u_cells(cell));
    if (y(cell) > u_cells(cell)) {
      exc->push_back(r);
      yv.push_back(y(cell));
    }
  }
  if (obs->empty()) fail("no usable cells for the point-process likelihood");
  if (exc->empty()) fail("no exceedances above the threshold among the fit cells");
  auto u_obs = std::make_shared<ad::Arr>((Eigen::Index)uv.size(), 1);
  for (std::size_t i = 0; i < uv.size(); ++i) (*u_obs)((Eigen::Index)i, 0) = uv[i];
  auto y_exc = std::make_shared<ad::Arr>((Eigen::Index)yv.size(), 1);
  for (std::size_t i = 0; i < yv.size(); ++i) (*y_exc)((Eigen::Index)i, 0) = yv[i];
  PpData data;
  data.obs_rows = obs;
  data.exc_rows = exc;
  data.u_obs = u_obs;
  data.y_exc = y_exc;
  data.n_y = n_y;
  data.validate();
  return data;
}

double pp_nll_at(const CompiledModel& m, const RunConfig& c, const ArrayXd& y,
                 const ArrayXd& u_cells, const std::vector<int>& cells) {
  const auto theta = m.eval_theta();
  const double xi = m.eval_xi();
  std::vector<double> yv, uv, qv, sv;
  for (int cell : cells) {
    const int r = m.theta_row(cell);
    if (r < 0 || !std::isfinite(u_cells(cell)) || !std::isfinite(y(cell))) continue;
    yv.push_back(y(cell));
    uv.push_back(u_cells(cell));
    qv.push_back(theta[0](r));
    sv.push_back(theta[1](r));
  }
  if (yv.empty()) return kNaN;
  auto wrap = [](const std::vector<double>& v) {
    return Eigen::Map<const ArrayXd>(v.data(), (Eigen::Index)v.size()).eval();
  };
  evt::PpContext ctx{c.n_y, c.variant, c.blend};
  return evt::pp_nll(wrap(yv), wrap(uv), wrap(qv), wrap(sv), xi, ctx,
                     c.blend.alpha, c.blend.beta);
}

ArrayXd pit_at(const CompiledModel& m, const RunConfig& c, const ArrayXd& y,
               const std::vector<int>& cells) {
  const auto theta = m.eval_theta();
  const double xi = m.eval_xi();
  std::vector<double> z;
  for (int cell : cells) {
    const int r = m.theta_row(cell);
    if (r < 0 || !std::isfinite(y(cell))) continue;
    const evt::QuantileParams qp{theta[0](r), theta[1](r), xi};
    z.push_back(metrics::pit_exponential(
        metrics::fitted_cdf(y(cell), qp, c.blend, c.n_y)));
  }
  return Eigen::Map<const ArrayXd>(z.data(), (Eigen::Index)z.size()).eval();
}

double smad_or_nan(const ArrayXd& z, double p1) {
  if (z.size() < 2 || metrics::smad_default_m(z.size(), p1) < 2) return kNaN;
  return metrics::smad(z, p1);
}

metrics::ScorePanel make_panel(const RunConfig& c, const CompiledModel& m,
                               const ArrayXd& y, const ArrayXd& u_cells,
                               const std::vector<int>& train,
                               const std::vector<int>& valid, long n_params) {
  metrics::ScorePanel p;
  p.training_loss = pp_nll_at(m, c, y, u_cells, train);
  p.validation_loss = valid.empty() ? kNaN : pp_nll_at(m, c, y, u_cells, valid);
  p.aic = metrics::aic(p.training_loss, n_params);
  p.smad_in = smad_or_nan(pit_at(m, c, y, train), c.metrics.smad_p1);
  p.smad_out =
      valid.empty() ? kNaN : smad_or_nan(pit_at(m, c, y, valid), c.metrics.smad_p1);
  p.twcrps = kNaN;
  if (c.metrics.twcrps) {
    const std::vector<int>& score_cells = valid.empty() ? train : valid;
    const ArrayXd v = metrics::default_thresholds();
    const auto theta = m.eval_theta();
    const double xi = m.eval_xi();
    std::vector<double> ys;
    std::vector<std::array<double, 2>> qs;
    for (int cell : score_cells) {
      const int r = m.theta_row(cell);
      if (r < 0 || !std::isfinite(y(cell))) continue;
      ys.push_back(y(cell));
      qs.push_back({theta[0](r), theta[1](r)});
    }
    if (!ys.empty()) {
      ArrayXd yv = Eigen::Map<const ArrayXd>(ys.data(), (Eigen::Index)ys.size());
      ArrayXXd phat((Eigen::Index)ys.size(), v.size());
      for (Eigen::Index i = 0; i < phat.rows(); ++i) {
        const evt::QuantileParams qp{qs[(std::size_t)i][0], qs[(std::size_t)i][1], xi};
        for (Eigen::Index j = 0; j < v.size(); ++j)
          phat(i, j) = metrics::fitted_cdf(v(j), qp, c.blend, c.n_y);
      }
      p.twcrps = metrics::twcrps(yv, phat, v);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Fit stages.

struct Stage {
  std::unique_ptr<CompiledModel> model;
  FitResult fit;
};

double link_intercept(Link link, double v) {
  switch (link) {
    case Link::identity: return v;
    case Link::exponential: return std::log(std::max(v, 1e-6));
    default: fail("logistic link has no quantile-based intercept");
  }
}

SurfaceConfig threshold_surface_config(const RunConfig& c) {
  if (!c.threshold_surface.empty()) return c.threshold_surface[0];
  SurfaceConfig sc = c.surfaces.at(0);
  sc.name = "u";
  sc.link = "identity";
  return sc;
}

Stage fit_threshold_stage(const RunConfig& c, const ArrayXXd& X,
                          const GridLayout& layout,
                          const std::vector<std::string>& names, const ArrayXd& y,
                          const std::vector<int>& fit_cells, const Checkpoint* warm,
                          ArrayXd* u_cells) {
  const SurfaceConfig tc = threshold_surface_config(c);
  ModelSpec ms;
  ms.surfaces = {resolve_surface(tc, names)};
  ms.shared_xi = false;

  std::vector<double> yv;
  for (int cell : fit_cells)
    if (std::isfinite(y(cell))) yv.push_back(y(cell));
  if (yv.size() < 2) fail("threshold fit needs at least two responses");
  ArrayXd ys = Eigen::Map<const ArrayXd>(yv.data(), (Eigen::Index)yv.size());
  std::sort(ys.data(), ys.data() + ys.size());
  const double init = link_intercept(ms.surfaces[0].link, quantile_sorted(ys, c.p_u));

  Stage st;
  st.model = std::make_unique<CompiledModel>(
      ms, X, layout, fit_cells, names, derive_seed(c.seed, 11),
      std::vector<double>{init}, warm ? &warm->aux : nullptr);
  if (warm) warm_start(*st.model, *warm);
  FitConfig cfg = c.threshold_train;
  cfg.selection = Selection::training_loss;  // quantile fit selects on its own loss
  ThresholdResult tr = estimate_threshold(*st.model, y, fit_cells, c.p_u, cfg);
  st.fit = std::move(tr.fit);
  *u_cells = ArrayXd::Constant(layout.n_cells(), kNaN);
  const auto& vc = st.model->valid_cells();
  for (std::size_t i = 0; i < vc.size(); ++i)
    (*u_cells)(vc[i]) = tr.u((Eigen::Index)i);
  return st;
}

Stage fit_pp_stage(const RunConfig& c, const ArrayXXd& X, const GridLayout& layout,
                   const std::vector<std::string>& names, const ArrayXd& y,
                   const ArrayXd& u_cells, const std::vector<int>& train,
                   const std::vector<int>& valid, const Checkpoint* warm) {
  if (c.surfaces.size() != 2)
    fail("the point-process model needs exactly two surfaces (location, spread)");
  if (!c.shared_xi) fail("the point-process model needs model.shared_xi");
  ModelSpec pm = resolve_model(c, names);

  std::vector<double> ev;
  for (int cell : train)
    if (std::isfinite(y(cell)) && std::isfinite(u_cells(cell)) &&
        y(cell) > u_cells(cell))
      ev.push_back(y(cell));
  if (ev.size() < 2) fail("too few exceedances above the threshold");
  ArrayXd es = Eigen::Map<const ArrayXd>(ev.data(), (Eigen::Index)ev.size());
  std::sort(es.data(), es.data() + es.size());
  const double loc = quantile_sorted(es, c.blend.alpha);
  const double spread =
      std::max(quantile_sorted(es, 1.0 - c.blend.beta / 2.0) -
                   quantile_sorted(es, c.blend.beta / 2.0),
               1e-6);
  const std::vector<double> init = {link_intercept(pm.surfaces[0].link, loc),
                                    link_intercept(pm.surfaces[1].link, spread)};

  Stage st;
  st.model = std::make_unique<CompiledModel>(pm, X, layout, train, names,
                                             derive_seed(c.seed, 12), init,
                                             warm ? &warm->aux : nullptr);
  if (warm) warm_start(*st.model, *warm);

  const PpData data = make_pp_data(*st.model, y, u_cells, train, c.n_y);
  const evt::PpVariant variant = c.variant;
  const evt::BgevConfig blend = c.blend;
  LossFn loss = [data, variant, blend](ad::Tape& t, const BuiltModel& b) {
    ad::Var nll = variant == evt::PpVariant::bgev
                      ? bgev_pp_nll(t, b.theta[0], b.theta[1], b.xi, data, blend)
                      : gev_pp_nll(t, b.theta[0], b.theta[1], b.xi, data,
                                   blend.alpha, blend.beta);
    return t.add(nll, b.penalty);
  };
  EvalFn validator{};
  if (!valid.empty()) {
    const CompiledModel* mp = st.model.get();
    validator = [mp, cc = c, yy = y, uu = u_cells, vv = valid]() {
      return pp_nll_at(*mp, cc, yy, uu, vv);
    };
  } else if (c.train.selection == Selection::validation_loss) {
    fail("validation selection needs a folds or split block");
  }
  st.fit = fit(*st.model, loss, validator, c.train);
  return st;
}

// ---------------------------------------------------------------------------
// Output tables.

void cell_coords(const GridLayout& layout, long cell, long* t, long* r, long* cl) {
  const long n_sites = layout.n_sites();
  *t = cell / n_sites;
  const long rem = cell % n_sites;
  *r = rem / layout.d2;
  *cl = rem % layout.d2;
}

std::string cell_prefix(const GridLayout& layout, long cell) {
  long t, r, cl;
  cell_coords(layout, cell, &t, &r, &cl);
  return std::to_string(t) + "\t" + std::to_string(r) + "\t" + std::to_string(cl);
}

std::string u_table(const GridLayout& layout, const ArrayXd& u_cells) {
  std::string out = "t_index\trow\tcol\tu\n";
  for (long k = 0; k < u_cells.size(); ++k) {
    if (!std::isfinite(u_cells(k))) continue;
    out += cell_prefix(layout, k);
    out += '\t';
    out += format_double(u_cells(k));
    out += '\n';
  }
  return out;
}

ArrayXd read_u_table(const std::string& path, const GridLayout& layout) {
  const std::string text = read_text_file(path);
  ArrayXd u = ArrayXd::Constant(layout.n_cells(), kNaN);
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (header) {
      if (line != "t_index\trow\tcol\tu")
        fail("threshold table " + path + " has an unexpected header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> tok;
    std::size_t s = 0;
    while (true) {
      std::size_t tab = line.find('\t', s);
      if (tab == std::string::npos) {
        tok.push_back(line.substr(s));
        break;
      }
      tok.push_back(line.substr(s, tab - s));
      s = tab + 1;
    }
    if (tok.size() != 4) fail("threshold table " + path + " has a malformed row");
    const long t = std::stol(tok[0]), r = std::stol(tok[1]), cl = std::stol(tok[2]);
    if (t < 0 || t >= layout.n_times || r < 0 || r >= layout.d1 || cl < 0 ||
        cl >= layout.d2)
      fail("threshold table " + path + " addresses a cell outside the grid");
    u(layout.cell((int)t, (int)r, (int)cl)) = parse_double(tok[3]);
  }
  return u;
}

std::string theta_table(const CompiledModel& m, const GridLayout& layout) {
  const auto theta = m.eval_theta();
  std::string out = "t_index\trow\tcol";
  for (const auto& s : m.spec().surfaces) out += "\t" + s.name;
  out += '\n';
  const auto& vc = m.valid_cells();
  for (std::size_t i = 0; i < vc.size(); ++i) {
    out += cell_prefix(layout, vc[i]);
    for (const auto& th : theta) {
      out += '\t';
      out += format_double(th((Eigen::Index)i));
    }
    out += '\n';
  }
  return out;
}

// Response-scale predictive quantile: the model-scale quantile of one
// observation (the per-period law tempered by n_y), clamped at zero and
// squared when the response was square-rooted at ingestion.
double response_quantile(const RunConfig& c, double p, const evt::QuantileParams& qp) {
  const double z = evt::bgev_quantile(std::pow(p, c.n_y), qp, c.blend);
  if (c.sqrt_response) {
    const double r = std::max(z, 0.0);
    return r * r;
  }
  return z;
}

std::string predictions_table(const RunConfig& c, const CompiledModel& m,
                              const GridLayout& layout) {
  const auto theta = m.eval_theta();
  const double xi = m.eval_xi();
  std::string out = "t_index\trow\tcol";
  for (double p : c.pred_quantiles) out += "\tq" + format_double(p);
  out += '\n';
  const auto& vc = m.valid_cells();
  for (std::size_t i = 0; i < vc.size(); ++i) {
    out += cell_prefix(layout, vc[i]);
    const evt::QuantileParams qp{theta[0]((Eigen::Index)i), theta[1]((Eigen::Index)i), xi};
    for (double p : c.pred_quantiles) {
      out += '\t';
      out += format_double(response_quantile(c, p, qp));
    }
    out += '\n';
  }
  return out;
}

std::string coef_table(const CompiledModel& m,
                       const std::vector<std::string>& predictor_names) {
  std::string out = "surface\tterm\tvalue\n";
  const auto& store = m.params();
  for (std::size_t si = 0; si < m.spec().surfaces.size(); ++si) {
    const SurfaceSpec& sp = m.spec().surfaces[si];
    const int bi = store.find(sp.name + ".intercept");
    if (bi >= 0)
      out += sp.name + "\t(intercept)\t" +
             format_double(store.block(bi).value(0, 0)) + "\n";
    const int bl = store.find(sp.name + ".linear");
    if (bl >= 0) {
      const auto& w = store.block(bl).value;
      for (std::size_t k = 0; k < sp.linear.size(); ++k)
        out += sp.name + "\t" + predictor_names[(std::size_t)sp.linear[k]] + "\t" +
               format_double(w((Eigen::Index)k, 0)) + "\n";
    }
  }
  if (m.spec().shared_xi)
    out += "(shared)\txi\t" + format_double(m.eval_xi()) + "\n";
  return out;
}

struct CurveSpec {
  std::size_t surface = 0;
  int additive_pos = 0;
  int predictor = 0;
  ArrayXd grid;     // abscissae
  double median = 0.0;
};

std::vector<CurveSpec> curve_specs(const CompiledModel& m, const ArrayXXd& X,
                                   const std::vector<int>& ref_cells, int n_grid = 201) {
  std::vector<CurveSpec> out;
  for (std::size_t si = 0; si < m.spec().surfaces.size(); ++si) {
    const SurfaceSpec& sp = m.spec().surfaces[si];
    for (std::size_t j = 0; j < sp.additive.size(); ++j) {
      CurveSpec cs;
      cs.surface = si;
      cs.additive_pos = (int)j;
      cs.predictor = sp.additive[j];
      std::vector<double> xv;
      for (int cell : ref_cells) xv.push_back(X(cell, cs.predictor));
      ArrayXd xs = Eigen::Map<const ArrayXd>(xv.data(), (Eigen::Index)xv.size());
      std::sort(xs.data(), xs.data() + xs.size());
      const double lo = xs(0), hi = xs(xs.size() - 1);
      cs.median = median(xs);
      cs.grid = ArrayXd::LinSpaced(n_grid, lo, hi);
      out.push_back(std::move(cs));
    }
  }
  return out;
}

// Fitted spline component along one predictor, centered by subtracting its
// value at the reference (median) abscissa.
ArrayXd centered_curve(const CompiledModel& m, const CurveSpec& cs) {
  ArrayXd vals = m.spline_curve((int)cs.surface, cs.additive_pos, cs.grid);
  ArrayXd at_med(1);
  at_med(0) = cs.median;
  const double ref = m.spline_curve((int)cs.surface, cs.additive_pos, at_med)(0);
  return vals - ref;
}

std::string qq_table(ArrayXd z) {
  std::sort(z.data(), z.data() + z.size());
  std::string out = "theoretical\tempirical\n";
  const double n = (double)z.size();
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    out += format_double(-std::log(1.0 - ((double)j + 1.0) / (n + 1.0)));
    out += '\t';
    out += format_double(z(j));
    out += '\n';
  }
  return out;
}

json fit_report_json(const FitResult& fr) {
  json j;
  j["epochs_run"] = fr.report.train_loss.size() - 1;
  j["best_epoch"] = fr.report.best_epoch;
  j["best_loss"] = fr.report.best_loss;
  j["final_train_loss"] = fr.report.train_loss.back();
  j["saves"] = fr.report.saved_epochs.size();
  j["diverged"] = fr.report.diverged;
  if (fr.report.diverged) j["divergence_epoch"] = fr.report.divergence_epoch;
  return j;
}

json panel_json(const metrics::ScorePanel& p) {
  json j;
  j["training_loss"] = p.training_loss;
  j["validation_loss"] = p.validation_loss;
  j["aic"] = p.aic;
  j["smad_in"] = p.smad_in;
  j["smad_out"] = p.smad_out;
  j["twcrps"] = p.twcrps;
  if (p.stls.has_value()) j["stls"] = *p.stls;
  return j;
}

// ---------------------------------------------------------------------------
// Truth recovery for synthetic scoring.

// Exact upper-tail quantile of the generating law of one cell. The
// point-process studies draw an exceedance with probability 1 - p_u and give
// it the intensity-ratio tail, so the generated cdf above the threshold is
// 1 - (1 - p) * Lambda(y) / Lambda(u) and the p-quantile maps to the
// classical-law quantile at exp(-(1 - p) * Lambda(u) / (1 - p_u)).
double truth_quantile(const SimulatedData& sd, Study study, Eigen::Index i, double p) {
  switch (study) {
    case Study::b2_lognormal:
      return std::exp(sd.q(i) + sd.s(i) * normal_quantile(p));
    case Study::b2_gpd:
      return evt::gpd_quantile(p, evt::GpdParams{sd.q(i), sd.s(i)});
    default: {
      const evt::QuantileParams qp{sd.q(i), sd.s(i), sd.xi};
      const evt::GevParams g = evt::reparam_to_classic(qp, 0.5, 0.5);
      const double lambda_u = -std::log(sd.p_u);
      const double pstar = std::exp(-(1.0 - p) * lambda_u / (1.0 - sd.p_u));
      return evt::gev_quantile(pstar, g);
    }
  }
}

std::optional<double> stls_vs_truth(const RunConfig& c, const CompiledModel& m,
                                    const std::vector<int>& cells) {
  if (c.scenario.n < 1) return std::nullopt;
  const SimulatedData sd = simulate(c.scenario);
  if (sd.y.size() != m.layout().n_cells()) return std::nullopt;
  const ArrayXd grid = metrics::stls_grid(c.metrics.stls_p, 0.9999, 200);
  const auto theta = m.eval_theta();
  const double xi = m.eval_xi();
  std::vector<int> rows, src;
  for (int cell : cells) {
    const int r = m.theta_row(cell);
    if (r >= 0) {
      rows.push_back(r);
      src.push_back(cell);
    }
  }
  if (rows.empty()) return std::nullopt;
  ArrayXXd fhat((Eigen::Index)rows.size(), grid.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const evt::QuantileParams qp{theta[0](rows[i]), theta[1](rows[i]), xi};
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const double tq =
          truth_quantile(sd, c.scenario.study, (Eigen::Index)src[i], grid(j));
      fhat((Eigen::Index)i, j) = metrics::fitted_cdf(tq, qp, c.blend, c.n_y);
    }
  }
  try {
    return metrics::stls(fhat, grid);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Shared fit-output emission.

void emit_fit_outputs(Artifacts& a, const RunConfig& c, const Prepared& p,
                      const Stage& thr, const ArrayXd& u_cells, const Stage& pp,
                      const metrics::ScorePanel& panel) {
  const GridLayout& layout = p.d.layout;
  a.write("u.tsv", u_table(layout, u_cells));
  a.write("params.tsv", theta_table(*pp.model, layout));
  a.write("predictions.tsv", predictions_table(c, *pp.model, layout));
  a.write("coef.tsv", coef_table(*pp.model, p.d.predictor_names));
  for (const CurveSpec& cs : curve_specs(*pp.model, p.d.X, p.train_cells)) {
    const std::string name = "curve_" + pp.model->spec().surfaces[cs.surface].name +
                             "_" + p.d.predictor_names[(std::size_t)cs.predictor] +
                             ".tsv";
    const ArrayXd vals = centered_curve(*pp.model, cs);
    std::string out = "x\tvalue\n";
    for (Eigen::Index i = 0; i < cs.grid.size(); ++i)
      out += format_double(cs.grid(i)) + "\t" + format_double(vals(i)) + "\n";
    a.write(name, out);
  }
  const std::vector<int>& qq_cells =
      p.valid_cells.empty() ? p.train_cells : p.valid_cells;
  a.write("qq.tsv", qq_table(pit_at(*pp.model, c, p.y, qq_cells)));

  save_checkpoint(a.path("threshold_ckpt.bin"), thr.fit.checkpoint);
  a.note("threshold_ckpt.bin");
  save_checkpoint(a.path("model_ckpt.bin"), pp.fit.checkpoint);
  a.note("model_ckpt.bin");

  json rep;
  rep["task"] = c.task;
  rep["n_params"] = pp.model->count_params();
  rep["xi"] = pp.model->eval_xi();
  rep["cells"] = {{"train", p.train_cells.size()}, {"valid", p.valid_cells.size()}};
  rep["panel"] = panel_json(panel);
  rep["fit"] = fit_report_json(pp.fit);
  rep["threshold_fit"] = fit_report_json(thr.fit);
  a.write("report.json", rep.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Tasks.

void run_simulate(const RunConfig& c, Artifacts& a, json& extra) {
  const SimulatedData sd = simulate(c.scenario);
  GridDataset d;
  d.layout = GridLayout{1, 1, (int)c.scenario.n};
  d.lat = ArrayXd::Zero(1);
  d.lon = ArrayXd::Zero(1);
  d.y = sd.y;
  d.mask.assign((std::size_t)c.scenario.n, false);
  d.X = sd.X;
  for (int j = 0; j < sd.X.cols(); ++j)
    d.predictor_names.push_back("x_" + std::to_string(j + 1));
  d.response_units = "";
  save_dataset(a.path("dataset.tsv"), d);
  a.note("dataset.tsv");
  a.note("dataset.tsv.meta");

  std::string truth = "t_index\tq\ts\tu\n";
  for (long k = 0; k < sd.y.size(); ++k) {
    truth += std::to_string(k);
    truth += '\t';
    truth += format_double(sd.q(k));
    truth += '\t';
    truth += format_double(sd.s(k));
    truth += '\t';
    truth += sd.u.size() > 0 ? format_double(sd.u(k)) : "na";
    truth += '\n';
  }
  a.write("truth.tsv", truth);

  json gen;
  gen["study"] = study_name(c.scenario.study);
  gen["n"] = c.scenario.n;
  gen["seed"] = c.scenario.seed;
  gen["coeff_seed"] = c.scenario.coeff_seed;
  gen["xi"] = sd.xi;
  gen["p_u"] = sd.p_u;
  switch (c.scenario.study) {
    case Study::b1_case1:
    case Study::b1_case2: gen["intercepts"] = {1.0, -0.5}; break;
    case Study::b2_lognormal: gen["intercepts"] = {6.0, 0.5}; break;
    case Study::b2_gpd: gen["intercepts"] = {0.5, 0.1}; break;
    case Study::b3_linear: gen["intercepts"] = {1.0, 0.5}; break;
    case Study::b3_additive: gen["intercepts"] = {15.0, 1.0}; break;
    case Study::b3_nonlinear: gen["intercepts"] = {20.0, 0.5}; break;
  }
  if (sd.coeffs.eta_q.size() > 0) {
    gen["coeff_q"] = std::vector<double>(sd.coeffs.eta_q.data(),
                                         sd.coeffs.eta_q.data() + sd.coeffs.eta_q.size());
    gen["coeff_s"] = std::vector<double>(sd.coeffs.eta_s.data(),
                                         sd.coeffs.eta_s.data() + sd.coeffs.eta_s.size());
  }
  extra["generator"] = gen;
}

void run_threshold(const RunConfig& c, Artifacts& a) {
  Prepared p = prepare(c);
  ArrayXd u_cells;
  Stage thr = fit_threshold_stage(c, p.d.X, p.d.layout, p.d.predictor_names, p.y,
                                  p.train_cells, nullptr, &u_cells);
  a.write("u.tsv", u_table(p.d.layout, u_cells));
  save_checkpoint(a.path("threshold_ckpt.bin"), thr.fit.checkpoint);
  a.note("threshold_ckpt.bin");

  long above = 0, total = 0;
  for (int cell : p.train_cells) {
    if (!std::isfinite(u_cells(cell)) || !std::isfinite(p.y(cell))) continue;
    ++total;
    if (p.y(cell) > u_cells(cell)) ++above;
  }
  json rep;
  rep["task"] = c.task;
  rep["n_params"] = thr.model->count_params();
  rep["fit"] = fit_report_json(thr.fit);
  rep["exceedance_fraction"] = total > 0 ? (double)above / (double)total : kNaN;
  rep["target_fraction"] = 1.0 - c.p_u;
  a.write("report.json", rep.dump(2) + "\n");
}

void run_bgev_pp(const RunConfig& c, Artifacts& a) {
  Prepared p = prepare(c);
  ArrayXd u_cells;
  Stage thr = fit_threshold_stage(c, p.d.X, p.d.layout, p.d.predictor_names, p.y,
                                  p.train_cells, nullptr, &u_cells);
  Stage pp = fit_pp_stage(c, p.d.X, p.d.layout, p.d.predictor_names, p.y, u_cells,
                          p.train_cells, p.valid_cells, nullptr);
  metrics::ScorePanel panel = make_panel(c, *pp.model, p.y, u_cells, p.train_cells,
                                         p.valid_cells, pp.model->count_params());
  panel.stls = stls_vs_truth(
      c, *pp.model, p.valid_cells.empty() ? p.train_cells : p.valid_cells);
  emit_fit_outputs(a, c, p, thr, u_cells, pp, panel);
}

void run_occurrence(const RunConfig& c, Artifacts& a) {
  Prepared p = prepare(c);
  if (c.surfaces.size() != 1) fail("occurrence needs exactly one surface");
  ModelSpec ms = resolve_model(c, p.d.predictor_names);
  ms.shared_xi = false;
  if (ms.surfaces[0].link != Link::logistic)
    fail("occurrence needs a logistic link");

  ArrayXd y01 = ArrayXd::Constant(p.d.n_cells(), kNaN);
  for (int cell : p.observed) y01(cell) = p.y(cell) > 0.0 ? 1.0 : 0.0;
  std::vector<double> init_v;
  {
    double s = 0.0;
    for (int cell : p.train_cells) s += y01(cell);
    ArrayXd train_y(p.train_cells.size());
    for (std::size_t i = 0; i < p.train_cells.size(); ++i)
      train_y((Eigen::Index)i) = y01(p.train_cells[i]);
    init_v = default_intercept_init(ms, train_y);
  }
  CompiledModel m(ms, p.d.X, p.d.layout, p.train_cells, p.d.predictor_names,
                  derive_seed(c.seed, 13), init_v);

  auto rows = std::make_shared<std::vector<int>>();
  std::vector<double> lv;
  for (int cell : p.train_cells) {
    const int r = m.theta_row(cell);
    if (r < 0 || !std::isfinite(y01(cell))) continue;
    rows->push_back(r);
    lv.push_back(y01(cell));
  }
  if (rows->empty()) fail("no usable cells for the occurrence fit");
  auto labels = std::make_shared<ad::Arr>((Eigen::Index)lv.size(), 1);
  for (std::size_t i = 0; i < lv.size(); ++i) (*labels)((Eigen::Index)i, 0) = lv[i];

  LossFn loss = [rows, labels](ad::Tape& t, const BuiltModel& b) {
    ad::Var p_obs = t.gather_rows(b.theta[0], rows);
    return t.add(bernoulli_loss(t, p_obs, labels), b.penalty);
  };
  auto bern_at = [&m, &y01](const std::vector<int>& cells) {
    const auto theta = m.eval_theta();
    double s = 0.0;
    long n = 0;
    for (int cell : cells) {
      const int r = m.theta_row(cell);
      if (r < 0 || !std::isfinite(y01(cell))) continue;
      const double pr = std::min(std::max(theta[0](r), 1e-12), 1.0 - 1e-12);
      s += -(y01(cell) * std::log(pr) + (1.0 - y01(cell)) * std::log1p(-pr));
      ++n;
    }
    return n > 0 ? s / (double)n : kNaN;
  };
  EvalFn validator{};
  if (!p.valid_cells.empty())
    validator = [&bern_at, vv = p.valid_cells]() { return bern_at(vv); };
  else if (c.train.selection == Selection::validation_loss)
    fail("validation selection needs a folds or split block");
  FitResult fr = fit(m, loss, validator, c.train);

  const auto theta = m.eval_theta();
  std::string prob = "t_index\trow\tcol\tprob\n";
  const auto& vc = m.valid_cells();
  for (std::size_t i = 0; i < vc.size(); ++i)
    prob += cell_prefix(p.d.layout, vc[i]) + "\t" +
            format_double(theta[0]((Eigen::Index)i)) + "\n";
  a.write("prob.tsv", prob);
  a.write("coef.tsv", coef_table(m, p.d.predictor_names));
  save_checkpoint(a.path("occurrence_ckpt.bin"), fr.checkpoint);
  a.note("occurrence_ckpt.bin");

  const double train_mean = bern_at(p.train_cells);
  json rep;
  rep["task"] = c.task;
  rep["n_params"] = m.count_params();
  rep["cells"] = {{"train", p.train_cells.size()}, {"valid", p.valid_cells.size()}};
  rep["fit"] = fit_report_json(fr);
  rep["panel"] = {{"training_loss", train_mean * (double)rows->size()},
                  {"validation_loss",
                   p.valid_cells.empty() ? kNaN
                                         : bern_at(p.valid_cells) *
                                               (double)p.valid_cells.size()},
                  {"aic", metrics::aic(train_mean * (double)rows->size(),
                                       m.count_params())}};
  a.write("report.json", rep.dump(2) + "\n");
}

// Rebuilds a compiled model around a stored checkpoint: the checkpoint's
// frozen stats/knots are restored, then its weights.
std::unique_ptr<CompiledModel> restore_model(const RunConfig& c, const Prepared& p,
                                             const Checkpoint& ckpt) {
  ModelSpec pm = resolve_model(c, p.d.predictor_names);
  std::vector<int> stat_cells = p.observed;
  if (stat_cells.size() < 2) {
    stat_cells.clear();
    for (int k = 0; k < 2 && k < (int)p.d.n_cells(); ++k) stat_cells.push_back(k);
  }
  auto m = std::make_unique<CompiledModel>(pm, p.d.X, p.d.layout, stat_cells,
                                           p.d.predictor_names,
                                           derive_seed(c.seed, 12),
                                           std::vector<double>{}, &ckpt.aux);
  warm_start(*m, ckpt);
  return m;
}

void run_predict(const RunConfig& c, Artifacts& a, json& extra) {
  Prepared p = prepare(c, false);
  const Checkpoint ckpt = load_checkpoint(c.checkpoint_in);
  extra["inputs"]["checkpoint_in"] = {{"path", c.checkpoint_in},
                                      {"hash", hash_bytes(read_text_file(c.checkpoint_in))}};
  auto m = restore_model(c, p, ckpt);
  a.write("predictions.tsv", predictions_table(c, *m, p.d.layout));
  a.write("params.tsv", theta_table(*m, p.d.layout));
  a.write("coef.tsv", coef_table(*m, p.d.predictor_names));
  const std::vector<int>& ref =
      p.observed.empty() ? m->valid_cells() : p.observed;
  for (const CurveSpec& cs : curve_specs(*m, p.d.X, ref)) {
    const std::string name = "curve_" + m->spec().surfaces[cs.surface].name + "_" +
                             p.d.predictor_names[(std::size_t)cs.predictor] + ".tsv";
    const ArrayXd vals = centered_curve(*m, cs);
    std::string out = "x\tvalue\n";
    for (Eigen::Index i = 0; i < cs.grid.size(); ++i)
      out += format_double(cs.grid(i)) + "\t" + format_double(vals(i)) + "\n";
    a.write(name, out);
  }
  json rep;
  rep["task"] = c.task;
  rep["n_params"] = m->count_params();
  rep["xi"] = m->eval_xi();
  rep["cells"] = {{"predicted", m->valid_cells().size()}};
  a.write("report.json", rep.dump(2) + "\n");
}

void run_score(const RunConfig& c, Artifacts& a, json& extra) {
  Prepared p = prepare(c);
  if (c.threshold_in.empty()) fail("task 'score' needs threshold_in");
  const Checkpoint ckpt = load_checkpoint(c.checkpoint_in);
  extra["inputs"]["checkpoint_in"] = {{"path", c.checkpoint_in},
                                      {"hash", hash_bytes(read_text_file(c.checkpoint_in))}};
  extra["inputs"]["threshold_in"] = {{"path", c.threshold_in},
                                     {"hash", hash_bytes(read_text_file(c.threshold_in))}};
  auto m = restore_model(c, p, ckpt);
  const ArrayXd u_cells = read_u_table(c.threshold_in, p.d.layout);
  metrics::ScorePanel panel = make_panel(c, *m, p.y, u_cells, p.train_cells,
                                         p.valid_cells, m->count_params());
  const std::vector<int>& score_cells =
      p.valid_cells.empty() ? p.train_cells : p.valid_cells;
  panel.stls = stls_vs_truth(c, *m, score_cells);
  a.write("qq.tsv", qq_table(pit_at(*m, c, p.y, score_cells)));
  json rep;
  rep["task"] = c.task;
  rep["n_params"] = m->count_params();
  rep["xi"] = m->eval_xi();
  rep["cells"] = {{"train", p.train_cells.size()}, {"valid", p.valid_cells.size()}};
  rep["panel"] = panel_json(panel);
  a.write("report.json", rep.dump(2) + "\n");
}

void run_gradcheck(const RunConfig& c, Artifacts& a) {
  Prepared p = prepare(c);
  std::vector<double> yv;
  for (int cell : p.train_cells)
    if (std::isfinite(p.y(cell))) yv.push_back(p.y(cell));
  ArrayXd ys = Eigen::Map<const ArrayXd>(yv.data(), (Eigen::Index)yv.size());
  std::sort(ys.data(), ys.data() + ys.size());
  const ArrayXd u_cells =
      ArrayXd::Constant(p.d.n_cells(), quantile_sorted(ys, c.p_u));
  Stage st;
  {
    // Build the model exactly as a fit would, without training it.
    RunConfig c0 = c;
    c0.train.epochs = 1;
    c0.train.stride = 1;
    c0.train.adam.lr = 0.0;
    st = fit_pp_stage(c0, p.d.X, p.d.layout, p.d.predictor_names, p.y, u_cells,
                      p.train_cells, {}, nullptr);
  }
  CompiledModel& m = *st.model;
  const PpData data = make_pp_data(m, p.y, u_cells, p.train_cells, c.n_y);

  std::vector<ArrayXXd> base;
  for (int i = 0; i < m.params().count(); ++i)
    base.push_back(m.params().block(i).value);
  auto eval_at = [&](const std::vector<ArrayXXd>& params) {
    for (int i = 0; i < m.params().count(); ++i)
      m.params().block(i).value = params[(std::size_t)i];
    ad::Tape t;
    BuiltModel b = m.build(t);
    ad::Var nll = c.variant == evt::PpVariant::bgev
                      ? bgev_pp_nll(t, b.theta[0], b.theta[1], b.xi, data, c.blend)
                      : gev_pp_nll(t, b.theta[0], b.theta[1], b.xi, data,
                                   c.blend.alpha, c.blend.beta);
    return t.scalar(t.add(nll, b.penalty));
  };
  std::vector<ArrayXXd> analytic;
  {
    for (int i = 0; i < m.params().count(); ++i)
      m.params().block(i).value = base[(std::size_t)i];
    ad::Tape t;
    BuiltModel b = m.build(t);
    ad::Var nll = c.variant == evt::PpVariant::bgev
                      ? bgev_pp_nll(t, b.theta[0], b.theta[1], b.xi, data, c.blend)
                      : gev_pp_nll(t, b.theta[0], b.theta[1], b.xi, data,
                                   c.blend.alpha, c.blend.beta);
    t.backward(t.add(nll, b.penalty));
    for (int i = 0; i < m.params().count(); ++i) {
      const ad::Var leaf = b.leaves[(std::size_t)i];
      analytic.push_back(t.has_grad(leaf)
                             ? t.grad(leaf)
                             : ArrayXXd::Zero(base[(std::size_t)i].rows(),
                                              base[(std::size_t)i].cols()));
    }
  }
  const GradCheckReport gc = grad_check(eval_at, base, analytic, 1e-5, 1e-4);
  for (int i = 0; i < m.params().count(); ++i)
    m.params().block(i).value = base[(std::size_t)i];

  json rep;
  rep["task"] = c.task;
  rep["pass"] = gc.pass;
  rep["max_rel_err"] = gc.max_rel_err;
  rep["checked"] = gc.checked;
  rep["excluded"] = gc.excluded;
  json fails = json::array();
  for (const auto& f : gc.failures) {
    json e;
    e["block"] = m.params().block(f.block).name;
    e["row"] = f.row;
    e["col"] = f.col;
    e["analytic"] = f.analytic;
    e["numeric"] = f.numeric;
    e["rel_err"] = f.rel_err;
    fails.push_back(e);
  }
  rep["failures"] = fails;
  a.write("report.json", rep.dump(2) + "\n");
  if (!gc.pass) fail("gradient check failed; see report.json");
}

void run_sweep(const RunConfig& c, Artifacts& a) {
  Prepared p = prepare(c);
  std::vector<std::pair<std::string, RunConfig>> variants;
  if (!c.sweep.forms.empty()) {
    for (const auto& f : c.sweep.forms) {
      RunConfig v = c;
      v.surfaces = sweep_form_surfaces(f, c.surfaces, p.d.predictor_names,
                                       c.sweep.interpreted, c.sweep.linear_pick);
      variants.emplace_back(f, std::move(v));
    }
  } else if (!c.sweep.p_u.empty()) {
    for (double pu : c.sweep.p_u) {
      RunConfig v = c;
      v.p_u = pu;
      variants.emplace_back("p_u=" + format_double(pu), std::move(v));
    }
  } else {
    for (const auto& [arch_name, layers] : c.sweep.architectures) {
      RunConfig v = c;
      for (auto& sc : v.surfaces)
        if (!sc.net.empty()) sc.layers = layers;
      variants.emplace_back(arch_name, std::move(v));
    }
  }

  struct Row {
    std::string name;
    bool ok = false;
    std::string error;
    long n_params = 0;
    metrics::ScorePanel panel;
    double xi = kNaN;
  };
  std::vector<Row> rows(variants.size());
  parallel_for((int)variants.size(), c.workers, [&](int i) {
    Row& row = rows[(std::size_t)i];
    row.name = variants[(std::size_t)i].first;
    const RunConfig& v = variants[(std::size_t)i].second;
    try {
      ArrayXd u_cells;
      Stage thr = fit_threshold_stage(v, p.d.X, p.d.layout, p.d.predictor_names,
                                      p.y, p.train_cells, nullptr, &u_cells);
      Stage pp = fit_pp_stage(v, p.d.X, p.d.layout, p.d.predictor_names, p.y,
                              u_cells, p.train_cells, p.valid_cells, nullptr);
      row.n_params = pp.model->count_params();
      row.panel = make_panel(v, *pp.model, p.y, u_cells, p.train_cells,
                             p.valid_cells, row.n_params);
      row.panel.stls = stls_vs_truth(
          v, *pp.model, p.valid_cells.empty() ? p.train_cells : p.valid_cells);
      row.xi = pp.model->eval_xi();
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  std::string table =
      "variant\tn_params\ttraining_loss\tvalidation_loss\taic\ttwcrps\tsmad_in\t"
      "smad_out\tstls\txi\tstatus\n";
  json jrows = json::array();
  for (const Row& r : rows) {
    if (r.ok) {
      table += r.name + "\t" + std::to_string(r.n_params) + "\t" +
               format_double(r.panel.training_loss) + "\t" +
               format_double(r.panel.validation_loss) + "\t" +
               format_double(r.panel.aic) + "\t" + format_double(r.panel.twcrps) +
               "\t" + format_double(r.panel.smad_in) + "\t" +
               format_double(r.panel.smad_out) + "\t" +
               (r.panel.stls ? format_double(*r.panel.stls) : "na") + "\t" +
               format_double(r.xi) + "\tok\n";
      json e;
      e["variant"] = r.name;
      e["n_params"] = r.n_params;
      e["panel"] = panel_json(r.panel);
      e["xi"] = r.xi;
      e["status"] = "ok";
      jrows.push_back(e);
    } else {
      table += r.name + "\tna\tna\tna\tna\tna\tna\tna\tna\tna\tfailed: " +
               r.error + "\n";
      json e;
      e["variant"] = r.name;
      e["status"] = "failed";
      e["error"] = r.error;
      jrows.push_back(e);
    }
  }
  a.write("sweep_table.tsv", table);
  json rep;
  rep["task"] = c.task;
  rep["rows"] = jrows;
  a.write("report.json", rep.dump(2) + "\n");
}

void run_bootstrap(const RunConfig& c, Artifacts& a) {
  Prepared p = prepare(c);
  ArrayXd u_base;
  Stage thr = fit_threshold_stage(c, p.d.X, p.d.layout, p.d.predictor_names, p.y,
                                  p.train_cells, nullptr, &u_base);
  Stage pp = fit_pp_stage(c, p.d.X, p.d.layout, p.d.predictor_names, p.y, u_base,
                          p.train_cells, p.valid_cells, nullptr);
  metrics::ScorePanel panel = make_panel(c, *pp.model, p.y, u_base, p.train_cells,
                                         p.valid_cells, pp.model->count_params());
  emit_fit_outputs(a, c, p, thr, u_base, pp, panel);

  // Replicate layout: named interpretable coefficients, centered spline
  // curves on fixed abscissae, and response-scale quantile maps.
  std::vector<std::string> coef_names;
  std::vector<double> coef_base;
  {
    const auto& store = pp.model->params();
    for (const auto& sp : pp.model->spec().surfaces) {
      const int bi = store.find(sp.name + ".intercept");
      if (bi >= 0) {
        coef_names.push_back(sp.name + ".intercept");
        coef_base.push_back(store.block(bi).value(0, 0));
      }
      const int bl = store.find(sp.name + ".linear");
      if (bl >= 0)
        for (std::size_t k = 0; k < sp.linear.size(); ++k) {
          coef_names.push_back(
              sp.name + "." + p.d.predictor_names[(std::size_t)sp.linear[k]]);
          coef_base.push_back(store.block(bl).value((Eigen::Index)k, 0));
        }
    }
    if (pp.model->spec().shared_xi) {
      coef_names.push_back("xi");
      coef_base.push_back(pp.model->eval_xi());
    }
  }
  const std::vector<CurveSpec> curves = curve_specs(*pp.model, p.d.X, p.train_cells);
  std::vector<ArrayXd> curve_base;
  for (const auto& cs : curves) curve_base.push_back(centered_curve(*pp.model, cs));
  const std::vector<int> base_cells = pp.model->valid_cells();
  std::vector<ArrayXd> qmap_base;
  {
    const auto theta = pp.model->eval_theta();
    const double xi = pp.model->eval_xi();
    for (double pq : c.pred_quantiles) {
      ArrayXd v((Eigen::Index)base_cells.size());
      for (std::size_t i = 0; i < base_cells.size(); ++i) {
        const evt::QuantileParams qp{theta[0]((Eigen::Index)i),
                                     theta[1]((Eigen::Index)i), xi};
        v((Eigen::Index)i) = response_quantile(c, pq, qp);
      }
      qmap_base.push_back(std::move(v));
    }
  }

  const int T = p.d.layout.n_times;
  const long n_sites = p.d.layout.n_sites();
  const auto seqs = stationary_bootstrap(T, c.bootstrap);
  const int B = c.bootstrap.b;
  ArrayXXd coef_s = ArrayXXd::Constant(B, (Eigen::Index)coef_names.size(), kNaN);
  std::vector<ArrayXXd> curve_s(curves.size());
  for (std::size_t k = 0; k < curves.size(); ++k)
    curve_s[k] = ArrayXXd::Constant(B, curves[k].grid.size(), kNaN);
  std::vector<ArrayXXd> qmap_s(c.pred_quantiles.size());
  for (std::size_t k = 0; k < qmap_s.size(); ++k)
    qmap_s[k] = ArrayXXd::Constant(B, (Eigen::Index)base_cells.size(), kNaN);
  std::vector<std::string> errors((std::size_t)B);

  const Checkpoint thr_ck = thr.fit.checkpoint;
  const Checkpoint pp_ck = pp.fit.checkpoint;

  parallel_for(B, c.workers, [&](int r) {
    try {
      const std::vector<int>& seq = seqs[(std::size_t)r];
      ArrayXXd Xr(p.d.X.rows(), p.d.X.cols());
      ArrayXd yr(p.y.size());
      std::vector<bool> mr((std::size_t)p.d.n_cells());
      for (int t = 0; t < T; ++t) {
        const long dst0 = (long)t * n_sites;
        const long src0 = (long)seq[(std::size_t)t] * n_sites;
        for (long s = 0; s < n_sites; ++s) {
          Xr.row(dst0 + s) = p.d.X.row(src0 + s);
          yr(dst0 + s) = p.y(src0 + s);
          mr[(std::size_t)(dst0 + s)] = p.d.mask[(std::size_t)(src0 + s)];
        }
      }
      auto usable = [&](const std::vector<int>& cells) {
        std::vector<int> out;
        for (int cell : cells)
          if (!mr[(std::size_t)cell]) out.push_back(cell);
        return out;
      };
      const std::vector<int> train_r = usable(p.train_cells);
      const std::vector<int> valid_r = usable(p.valid_cells);
      if (train_r.empty()) throw std::runtime_error("resample left no training cells");
      ArrayXd ur;
      Stage thr_r = fit_threshold_stage(c, Xr, p.d.layout, p.d.predictor_names, yr,
                                        train_r, &thr_ck, &ur);
      Stage pp_r = fit_pp_stage(c, Xr, p.d.layout, p.d.predictor_names, yr, ur,
                                train_r, valid_r, &pp_ck);
      const auto& store = pp_r.model->params();
      Eigen::Index ci = 0;
      for (const auto& sp : pp_r.model->spec().surfaces) {
        const int bi = store.find(sp.name + ".intercept");
        if (bi >= 0) coef_s(r, ci++) = store.block(bi).value(0, 0);
        const int bl = store.find(sp.name + ".linear");
        if (bl >= 0)
          for (std::size_t k = 0; k < sp.linear.size(); ++k)
            coef_s(r, ci++) = store.block(bl).value((Eigen::Index)k, 0);
      }
      if (pp_r.model->spec().shared_xi) coef_s(r, ci++) = pp_r.model->eval_xi();
      for (std::size_t k = 0; k < curves.size(); ++k)
        curve_s[k].row(r) = centered_curve(*pp_r.model, curves[k]).transpose();
      const auto theta = pp_r.model->eval_theta();
      const double xi = pp_r.model->eval_xi();
      for (std::size_t kq = 0; kq < c.pred_quantiles.size(); ++kq)
        for (std::size_t i = 0; i < base_cells.size(); ++i) {
          const int row = pp_r.model->theta_row(base_cells[i]);
          if (row < 0) continue;
          const evt::QuantileParams qp{theta[0](row), theta[1](row), xi};
          qmap_s[kq]((Eigen::Index)r, (Eigen::Index)i) =
              response_quantile(c, c.pred_quantiles[kq], qp);
        }
    } catch (const std::exception& e) {
      errors[(std::size_t)r] = e.what();
    }
  });

  std::vector<int> good;
  for (int r = 0; r < B; ++r)
    if (errors[(std::size_t)r].empty()) good.push_back(r);
  if (good.empty()) fail("every bootstrap replicate failed");
  auto keep_rows = [&](const ArrayXXd& m) {
    ArrayXXd out((Eigen::Index)good.size(), m.cols());
    for (std::size_t i = 0; i < good.size(); ++i) out.row((Eigen::Index)i) = m.row(good[i]);
    return out;
  };

  {
    const Envelope env = pointwise_envelope(keep_rows(coef_s));
    std::string out = "term\tbase\tmedian\tlo\thi\n";
    for (std::size_t k = 0; k < coef_names.size(); ++k)
      out += coef_names[k] + "\t" + format_double(coef_base[k]) + "\t" +
             format_double(env.median((Eigen::Index)k)) + "\t" +
             format_double(env.lo((Eigen::Index)k)) + "\t" +
             format_double(env.hi((Eigen::Index)k)) + "\n";
    a.write("bootstrap_coef.tsv", out);
  }
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const Envelope env = pointwise_envelope(keep_rows(curve_s[k]));
    const auto& cs = curves[k];
    std::string out = "x\tbase\tmedian\tlo\thi\n";
    for (Eigen::Index i = 0; i < cs.grid.size(); ++i)
      out += format_double(cs.grid(i)) + "\t" + format_double(curve_base[k](i)) +
             "\t" + format_double(env.median(i)) + "\t" + format_double(env.lo(i)) +
             "\t" + format_double(env.hi(i)) + "\n";
    a.write("bootstrap_curve_" + pp.model->spec().surfaces[cs.surface].name + "_" +
                p.d.predictor_names[(std::size_t)cs.predictor] + ".tsv",
            out);
  }
  for (std::size_t kq = 0; kq < c.pred_quantiles.size(); ++kq) {
    const Envelope env = pointwise_envelope(keep_rows(qmap_s[kq]));
    std::string out = "t_index\trow\tcol\tbase\tmedian\tlo\thi\n";
    for (std::size_t i = 0; i < base_cells.size(); ++i)
      out += cell_prefix(p.d.layout, base_cells[i]) + "\t" +
             format_double(qmap_base[kq]((Eigen::Index)i)) + "\t" +
             format_double(env.median((Eigen::Index)i)) + "\t" +
             format_double(env.lo((Eigen::Index)i)) + "\t" +
             format_double(env.hi((Eigen::Index)i)) + "\n";
    a.write("bootstrap_quantile_" + format_double(c.pred_quantiles[kq]) + ".tsv",
            out);
  }

  json rep = json::parse(read_text_file(a.path("report.json")));
  rep["bootstrap"] = {{"replicates", B},
                      {"succeeded", good.size()},
                      {"mean_block_len", c.bootstrap.mean_block_len},
                      {"seed", c.bootstrap.seed}};
  json fails = json::array();
  for (int r = 0; r < B; ++r)
    if (!errors[(std::size_t)r].empty())
      fails.push_back({{"replicate", r}, {"error", errors[(std::size_t)r]}});
  rep["bootstrap"]["failures"] = fails;
  a.write("report.json", rep.dump(2) + "\n");
}

}  // namespace

std::vector<SurfaceConfig> sweep_form_surfaces(
    const std::string& form, const std::vector<SurfaceConfig>& base,
    const std::vector<std::string>& all_predictors,
    const std::vector<std::string>& interpreted,
    const std::vector<std::vector<std::string>>& linear_pick) {
  auto contains = [](const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  for (const auto& nm : interpreted)
    if (!contains(all_predictors, nm))
      fail("sweep.interpreted names unknown predictor '" + nm + "'");
  std::vector<std::string> rest;
  for (const auto& nm : all_predictors)
    if (!contains(interpreted, nm)) rest.push_back(nm);

  std::vector<SurfaceConfig> out;
  for (std::size_t si = 0; si < base.size(); ++si) {
    SurfaceConfig sc = base[si];
    sc.linear.clear();
    sc.additive.clear();
    sc.net.clear();
    const std::vector<std::string> pick =
        si < linear_pick.size() ? linear_pick[si] : std::vector<std::string>{};
    std::vector<std::string> interp_rest;
    for (const auto& nm : interpreted)
      if (!contains(pick, nm)) interp_rest.push_back(nm);

    if (form == "linear") {
      sc.linear = all_predictors;
    } else if (form == "gam") {
      sc.additive = all_predictors;
    } else if (form == "nn") {
      sc.net = all_predictors;
    } else if (form == "linear+gam") {
      sc.linear = pick;
      for (const auto& nm : all_predictors)
        if (!contains(pick, nm)) sc.additive.push_back(nm);
    } else if (form == "linear+nn") {
      sc.linear = interpreted;
      sc.net = rest;
    } else if (form == "gam+nn") {
      sc.additive = interpreted;
      sc.net = rest;
    } else if (form == "linear+gam+nn") {
      sc.linear = pick;
      sc.additive = interp_rest;
      sc.net = rest;
    } else {
      fail("unknown sweep form '" + form + "'");
    }
    if (sc.net.empty()) {
      sc.layers.clear();
    } else if (sc.layers.empty()) {
      fail("sweep form '" + form + "' needs layer stacks in the base model");
    }
    if (sc.lambda.size() > 1 && sc.lambda.size() != sc.additive.size())
      sc.lambda.clear();
    out.push_back(std::move(sc));
  }
  return out;
}

std::string run(const RunConfig& config) {
  RunConfig c = config;
  c.validate();
  std::filesystem::create_directories(c.out_dir);
  Artifacts a{c.out_dir, {}};
  json extra;
  extra["inputs"] = json::object();
  if (!c.dataset.empty()) {
    extra["inputs"]["dataset"] = {
        {"path", c.dataset},
        {"hash", hash_bytes(read_text_file(c.dataset))},
        {"meta_hash", hash_bytes(read_text_file(c.dataset + ".meta"))}};
  }

  if (c.task == "simulate") {
    run_simulate(c, a, extra);
  } else if (c.task == "threshold") {
    run_threshold(c, a);
  } else if (c.task == "bgev_pp") {
    run_bgev_pp(c, a);
  } else if (c.task == "occurrence") {
    run_occurrence(c, a);
  } else if (c.task == "predict") {
    run_predict(c, a, extra);
  } else if (c.task == "score") {
    run_score(c, a, extra);
  } else if (c.task == "gradcheck") {
    run_gradcheck(c, a);
  } else if (c.task == "sweep") {
    run_sweep(c, a);
  } else if (c.task == "bootstrap") {
    run_bootstrap(c, a);
  } else {
    fail("unknown task '" + c.task + "'");
  }

  json man;
  man["version"] = kVersion;
  man["task"] = c.task;
  man["response_transform"] = c.sqrt_response ? "sqrt" : "none";
  man["config"] = json::parse(config_echo(c));
  man["inputs"] = extra["inputs"];
  if (extra.contains("generator")) man["generator"] = extra["generator"];
  json outs;
  for (const auto& [name, h] : a.hashes) outs[name] = h;
  man["outputs"] = outs;
  const std::string man_path = a.path("manifest.json");
  atomic_write_text(man_path, man.dump(2) + "\n");
  return man_path;
}

}  // namespace evreg
