#include "evreg/io.hpp"

#include <set>
#include <stdexcept>
#include <utility>

#include "evreg/textio.hpp"
#include "json.hpp"

namespace evreg {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) {
  throw std::runtime_error("config: " + msg);
}

std::string jp(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// One JSON object with consumed-key tracking: anything left over at finish()
// is reported as an unknown key, so misspelled settings cannot pass silently.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad((path_.empty() ? "config" : path_) + " must be an object");
  }

  const json* child(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  double num(const char* key, double def) {
    const json* c = child(key);
    if (!c) return def;
    if (!c->is_number()) bad(jp(path_, key) + " must be a number");
    return c->get<double>();
  }

  long inum(const char* key, long def) {
    const json* c = child(key);
    if (!c) return def;
    if (!c->is_number_integer()) bad(jp(path_, key) + " must be an integer");
    return c->get<long>();
  }

  std::uint64_t unum(const char* key, std::uint64_t def) {
    const json* c = child(key);
    if (!c) return def;
    if (!(c->is_number_unsigned() ||
          (c->is_number_integer() && c->get<long long>() >= 0)))
      bad(jp(path_, key) + " must be a non-negative integer");
    return c->get<std::uint64_t>();
  }

  bool flag(const char* key, bool def) {
    const json* c = child(key);
    if (!c) return def;
    if (!c->is_boolean()) bad(jp(path_, key) + " must be true/false");
    return c->get<bool>();
  }

  std::string str(const char* key, std::string def) {
    const json* c = child(key);
    if (!c) return def;
    if (!c->is_string()) bad(jp(path_, key) + " must be a string");
    return c->get<std::string>();
  }

  std::vector<std::string> str_list(const char* key) {
    const json* c = child(key);
    std::vector<std::string> out;
    if (!c) return out;
    if (!c->is_array()) bad(jp(path_, key) + " must be an array of strings");
    for (const auto& e : *c) {
      if (!e.is_string()) bad(jp(path_, key) + " must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::vector<double> num_list(const char* key) {
    const json* c = child(key);
    std::vector<double> out;
    if (!c) return out;
    if (!c->is_array()) bad(jp(path_, key) + " must be an array of numbers");
    for (const auto& e : *c) {
      if (!e.is_number()) bad(jp(path_, key) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const std::string& path() const { return path_; }

  void finish() {
    for (const auto& it : j_.items())
      if (!used_.count(it.key()))
        bad((path_.empty() ? std::string("config") : path_) +
            ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

LayerKind kind_from_name(const std::string& n, const std::string& where) {
  if (n == "dense") return LayerKind::dense;
  if (n == "conv") return LayerKind::conv;
  if (n == "recurrent") return LayerKind::recurrent;
  bad(where + ": unknown layer kind '" + n + "'");
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    default: return "recurrent";
  }
}

Activation act_from_name(const std::string& n, const std::string& where) {
  if (n == "relu") return Activation::relu;
  if (n == "identity") return Activation::identity;
  bad(where + ": unknown activation '" + n + "'");
}

const char* act_name(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

Selection sel_from_name(const std::string& n, const std::string& where) {
  if (n == "training_loss") return Selection::training_loss;
  if (n == "validation_loss") return Selection::validation_loss;
  bad(where + ": unknown selection '" + n + "'");
}

const char* sel_name(Selection s) {
  return s == Selection::training_loss ? "training_loss" : "validation_loss";
}

evt::PpVariant variant_from_name(const std::string& n, const std::string& where) {
  if (n == "gev") return evt::PpVariant::gev;
  if (n == "bgev") return evt::PpVariant::bgev;
  bad(where + ": unknown variant '" + n + "'");
}

LayerSpec parse_layer(const json& j, const std::string& path) {
  Obj o(j, path);
  LayerSpec ls;
  ls.kind = kind_from_name(o.str("kind", "dense"), path);
  ls.width = (int)o.inum("width", 0);
  ls.act = act_from_name(o.str("act", "relu"), path);
  ls.d1 = (int)o.inum("d1", 1);
  ls.d2 = (int)o.inum("d2", 1);
  ls.tau1 = (int)o.inum("tau1", 0);
  ls.tau2 = (int)o.inum("tau2", 0);
  o.finish();
  return ls;
}

std::vector<LayerSpec> parse_layers(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path + " must be an array");
  std::vector<LayerSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_layer(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

SurfaceConfig parse_surface(const json& j, const std::string& path) {
  Obj o(j, path);
  SurfaceConfig sc;
  sc.name = o.str("name", "");
  sc.link = o.str("link", "identity");
  sc.linear = o.str_list("linear");
  sc.additive = o.str_list("additive");
  sc.knots = (int)o.inum("knots", 20);
  sc.lambda = o.num_list("lambda");
  sc.net = o.str_list("net");
  if (const json* ls = o.child("layers")) sc.layers = parse_layers(*ls, path + ".layers");
  o.finish();
  return sc;
}

FitConfig parse_fit(const json& j, const std::string& path, FitConfig base) {
  Obj o(j, path);
  base.epochs = (int)o.inum("epochs", base.epochs);
  base.stride = (int)o.inum("stride", base.stride);
  base.adam.lr = o.num("lr", base.adam.lr);
  base.adam.beta1 = o.num("beta1", base.adam.beta1);
  base.adam.beta2 = o.num("beta2", base.adam.beta2);
  base.adam.eps = o.num("eps", base.adam.eps);
  base.seed = o.unum("seed", base.seed);
  base.selection = sel_from_name(o.str("selection", sel_name(base.selection)), path);
  o.finish();
  return base;
}

evt::BgevConfig parse_blend(const json& j, const std::string& path, evt::BgevConfig base) {
  Obj o(j, path);
  base.alpha = o.num("alpha", base.alpha);
  base.beta = o.num("beta", base.beta);
  base.p_a = o.num("p_a", base.p_a);
  base.p_b = o.num("p_b", base.p_b);
  base.c1 = o.num("c1", base.c1);
  base.c2 = o.num("c2", base.c2);
  o.finish();
  return base;
}

const std::set<std::string>& form_names() {
  static const std::set<std::string> kForms = {
      "linear",     "gam",    "nn",           "linear+gam",
      "linear+nn",  "gam+nn", "linear+gam+nn"};
  return kForms;
}

void check_surface(const SurfaceConfig& sc, const std::string& where) {
  if (sc.name.empty()) bad(where + ": surface name must not be empty");
  const std::string tag = where + " surface '" + sc.name + "'";
  link_from_name(sc.link);
  if (!sc.additive.empty() && sc.knots < 4)
    bad(tag + ": knots must be at least 4");
  if (!(sc.lambda.empty() || sc.lambda.size() == 1 ||
        sc.lambda.size() == sc.additive.size()))
    bad(tag + ": lambda must be empty, one value, or one per additive term");
  for (double l : sc.lambda)
    if (!(l >= 0.0)) bad(tag + ": lambda values must be non-negative");
  if (sc.net.empty() != sc.layers.empty())
    bad(tag + ": net predictors and layers must be declared together");
  for (const auto& ls : sc.layers) {
    if (ls.width < 1) bad(tag + ": layer width must be positive");
    if (ls.kind == LayerKind::conv &&
        (ls.d1 < 1 || ls.d2 < 1 || ls.d1 % 2 == 0 || ls.d2 % 2 == 0))
      bad(tag + ": conv filter dims must be odd and positive");
    if (ls.kind == LayerKind::recurrent && (ls.tau1 < 0 || ls.tau2 < 0))
      bad(tag + ": recurrent window must be non-negative");
  }
  std::set<std::string> seen;
  for (const auto* part : {&sc.linear, &sc.additive, &sc.net})
    for (const auto& p : *part) {
      if (p.empty()) bad(tag + ": empty predictor name");
      if (!seen.insert(p).second)
        bad(tag + ": predictor '" + p + "' used in more than one component");
    }
}

json layer_json(const LayerSpec& ls) {
  json j;
  j["kind"] = kind_name(ls.kind);
  j["width"] = ls.width;
  j["act"] = act_name(ls.act);
  if (ls.kind == LayerKind::conv) {
    j["d1"] = ls.d1;
    j["d2"] = ls.d2;
  }
  if (ls.kind == LayerKind::recurrent) {
    j["tau1"] = ls.tau1;
    j["tau2"] = ls.tau2;
  }
  return j;
}

json surface_json(const SurfaceConfig& sc) {
  json j;
  j["name"] = sc.name;
  j["link"] = sc.link;
  j["linear"] = sc.linear;
  j["additive"] = sc.additive;
  j["knots"] = sc.knots;
  j["lambda"] = sc.lambda;
  j["net"] = sc.net;
  json layers = json::array();
  for (const auto& ls : sc.layers) layers.push_back(layer_json(ls));
  j["layers"] = layers;
  return j;
}

json fit_json(const FitConfig& f) {
  json j;
  j["epochs"] = f.epochs;
  j["stride"] = f.stride;
  j["lr"] = f.adam.lr;
  j["beta1"] = f.adam.beta1;
  j["beta2"] = f.adam.beta2;
  j["eps"] = f.adam.eps;
  j["seed"] = f.seed;
  j["selection"] = sel_name(f.selection);
  return j;
}

}  // namespace

Link link_from_name(const std::string& name) {
  if (name == "identity") return Link::identity;
  if (name == "exponential") return Link::exponential;
  if (name == "logistic") return Link::logistic;
  bad("unknown link '" + name + "'");
}

const char* link_name(Link link) {
  switch (link) {
    case Link::identity: return "identity";
    case Link::exponential: return "exponential";
    default: return "logistic";
  }
}

Study study_from_name(const std::string& name) {
  if (name == "b1_case1") return Study::b1_case1;
  if (name == "b1_case2") return Study::b1_case2;
  if (name == "b2_lognormal") return Study::b2_lognormal;
  if (name == "b2_gpd") return Study::b2_gpd;
  if (name == "b3_linear") return Study::b3_linear;
  if (name == "b3_additive") return Study::b3_additive;
  if (name == "b3_nonlinear") return Study::b3_nonlinear;
  bad("unknown study '" + name + "'");
}

const char* study_name(Study s) {
  switch (s) {
    case Study::b1_case1: return "b1_case1";
    case Study::b1_case2: return "b1_case2";
    case Study::b2_lognormal: return "b2_lognormal";
    case Study::b2_gpd: return "b2_gpd";
    case Study::b3_linear: return "b3_linear";
    case Study::b3_additive: return "b3_additive";
    default: return "b3_nonlinear";
  }
}

void RunConfig::validate() const {
  static const std::set<std::string> kTasks = {
      "simulate", "occurrence", "threshold", "bgev_pp", "score",
      "predict",  "bootstrap",  "sweep",     "gradcheck"};
  if (!kTasks.count(task)) bad("unknown task '" + task + "'");
  if (out_dir.empty()) bad("out_dir must not be empty");
  if (workers < 1) bad("workers must be at least 1");
  if (!(n_y > 0)) bad("pp.n_y must be positive");
  if (!(p_u > 0 && p_u < 1)) bad("pp.p_u must lie in (0, 1)");
  blend.validate();
  train.validate();
  threshold_train.validate();
  if (!(xi_init > 0 && xi_init < 1)) bad("model.xi_init must lie in (0, 1)");

  std::set<std::string> names;
  for (const auto& sc : surfaces) {
    check_surface(sc, "model");
    if (!names.insert(sc.name).second)
      bad("duplicate surface name '" + sc.name + "'");
  }
  if (threshold_surface.size() > 1) bad("threshold.surface must be a single surface");
  for (const auto& sc : threshold_surface) check_surface(sc, "threshold");

  if (folds.enabled) {
    if (folds.k < 2) bad("folds.k must be at least 2");
    if (folds.block_len < 1) bad("folds.block_len must be positive");
    if (folds.validation_fold < 0 || folds.validation_fold >= folds.k)
      bad("folds.validation_fold must lie in [0, k)");
  }
  if (split.enabled && !(split.train_fraction > 0 && split.train_fraction < 1))
    bad("split.train_fraction must lie in (0, 1)");
  if (folds.enabled && split.enabled)
    bad("folds and split cannot both be active");
  if (bootstrap.b < 1) bad("bootstrap.b must be at least 1");
  if (!(bootstrap.mean_block_len >= 1))
    bad("bootstrap.mean_block_len must be at least 1");
  if (!(metrics.stls_p > 0 && metrics.stls_p < 1))
    bad("metrics.stls_p must lie in (0, 1)");
  if (!(metrics.smad_p1 > 0 && metrics.smad_p1 < 1))
    bad("metrics.smad_p1 must lie in (0, 1)");
  if (pred_quantiles.empty()) bad("pred_quantiles must not be empty");
  for (std::size_t i = 0; i < pred_quantiles.size(); ++i) {
    if (!(pred_quantiles[i] > 0 && pred_quantiles[i] < 1))
      bad("pred_quantiles must lie in (0, 1)");
    if (i > 0 && !(pred_quantiles[i] > pred_quantiles[i - 1]))
      bad("pred_quantiles must increase");
  }
  if (scenario.n < 0) bad("simulate.n must be non-negative");

  const bool needs_model = task == "occurrence" || task == "threshold" ||
                           task == "bgev_pp" || task == "bootstrap" ||
                           task == "sweep" || task == "gradcheck";
  if (needs_model) {
    if (dataset.empty()) bad("task '" + task + "' needs a dataset");
    if (surfaces.empty()) bad("task '" + task + "' needs model.surfaces");
  }
  if (task == "simulate" && scenario.n < 1)
    bad("task 'simulate' needs simulate.n >= 1");
  if ((task == "predict" || task == "score")) {
    if (dataset.empty()) bad("task '" + task + "' needs a dataset");
    if (checkpoint_in.empty()) bad("task '" + task + "' needs checkpoint_in");
    if (surfaces.empty()) bad("task '" + task + "' needs model.surfaces");
  }
  if (task == "sweep") {
    if (!sweep.enabled) bad("task 'sweep' needs a sweep block");
    const int axes = (!sweep.forms.empty() ? 1 : 0) +
                     (!sweep.p_u.empty() ? 1 : 0) +
                     (!sweep.architectures.empty() ? 1 : 0);
    if (axes != 1) bad("sweep must set exactly one of forms/p_u/architectures");
    bool needs_pick = false;
    for (const auto& f : sweep.forms) {
      if (!form_names().count(f)) bad("unknown sweep form '" + f + "'");
      if (f == "linear+gam" || f == "linear+gam+nn") needs_pick = true;
      if (f != "linear" && f != "gam" && f != "nn" && sweep.interpreted.empty())
        bad("sweep form '" + f + "' needs sweep.interpreted");
    }
    if (needs_pick && sweep.linear_pick.size() != surfaces.size())
      bad("sweep.linear_pick must list one predictor set per surface");
    for (const auto& pick : sweep.linear_pick)
      for (const auto& p : pick) {
        bool found = false;
        for (const auto& q : sweep.interpreted) found = found || q == p;
        if (!found)
          bad("sweep.linear_pick entry '" + p + "' is not in sweep.interpreted");
      }
    for (double p : sweep.p_u)
      if (!(p > 0 && p < 1)) bad("sweep.p_u values must lie in (0, 1)");
    for (const auto& [arch_name, layers] : sweep.architectures) {
      if (arch_name.empty()) bad("sweep architecture needs a name");
      if (layers.empty()) bad("sweep architecture '" + arch_name + "' has no layers");
    }
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  Obj o(j, "");
  RunConfig c;
  c.task = o.str("task", "");
  c.dataset = o.str("dataset", "");
  c.out_dir = o.str("out_dir", "out");
  c.seed = o.unum("seed", 1);
  c.workers = (int)o.inum("workers", 1);
  c.sqrt_response = o.flag("sqrt_response", false);

  if (const json* pp = o.child("pp")) {
    Obj p(*pp, "pp");
    c.n_y = p.num("n_y", c.n_y);
    c.p_u = p.num("p_u", c.p_u);
    c.variant = variant_from_name(p.str("variant", "bgev"), "pp.variant");
    if (const json* b = p.child("blend")) c.blend = parse_blend(*b, "pp.blend", c.blend);
    p.finish();
  }
  if (const json* m = o.child("model")) {
    Obj mo(*m, "model");
    c.shared_xi = mo.flag("shared_xi", c.shared_xi);
    c.xi_init = mo.num("xi_init", c.xi_init);
    if (const json* ss = mo.child("surfaces")) {
      if (!ss->is_array()) bad("model.surfaces must be an array");
      for (std::size_t i = 0; i < ss->size(); ++i)
        c.surfaces.push_back(parse_surface(
            (*ss)[i], "model.surfaces[" + std::to_string(i) + "]"));
    }
    mo.finish();
  }
  if (const json* t = o.child("train")) c.train = parse_fit(*t, "train", FitConfig{});
  c.threshold_train = c.train;
  if (const json* th = o.child("threshold")) {
    Obj t(*th, "threshold");
    if (const json* tt = t.child("train"))
      c.threshold_train = parse_fit(*tt, "threshold.train", c.train);
    if (const json* ts = t.child("surface"))
      c.threshold_surface.push_back(parse_surface(*ts, "threshold.surface"));
    t.finish();
  }
  if (const json* f = o.child("folds")) {
    Obj fo(*f, "folds");
    c.folds.enabled = true;
    c.folds.k = (int)fo.inum("k", c.folds.k);
    c.folds.seed = fo.unum("seed", c.folds.seed);
    c.folds.block_len = (int)fo.inum("block_len", c.folds.block_len);
    c.folds.validation_fold = (int)fo.inum("validation_fold", c.folds.validation_fold);
    fo.finish();
  }
  if (const json* s = o.child("split")) {
    Obj so(*s, "split");
    c.split.enabled = true;
    c.split.train_fraction = so.num("train_fraction", c.split.train_fraction);
    c.split.seed = so.unum("seed", c.split.seed);
    so.finish();
  }
  if (const json* b = o.child("bootstrap")) {
    Obj bo(*b, "bootstrap");
    c.bootstrap.b = (int)bo.inum("b", c.bootstrap.b);
    c.bootstrap.mean_block_len = bo.num("mean_block_len", c.bootstrap.mean_block_len);
    c.bootstrap.seed = bo.unum("seed", c.bootstrap.seed);
    bo.finish();
  }
  if (const json* m = o.child("metrics")) {
    Obj mo(*m, "metrics");
    c.metrics.stls_p = mo.num("stls_p", c.metrics.stls_p);
    c.metrics.smad_p1 = mo.num("smad_p1", c.metrics.smad_p1);
    c.metrics.twcrps = mo.flag("twcrps", c.metrics.twcrps);
    mo.finish();
  }
  {
    auto pq = o.num_list("pred_quantiles");
    if (!pq.empty()) c.pred_quantiles = std::move(pq);
  }
  if (const json* s = o.child("simulate")) {
    Obj so(*s, "simulate");
    c.scenario.study = study_from_name(so.str("study", "b1_case1"));
    c.scenario.n = so.inum("n", 0);
    c.scenario.seed = so.unum("seed", 0);
    c.scenario.coeff_seed = so.unum("coeff_seed", c.scenario.coeff_seed);
    so.finish();
  }
  if (const json* s = o.child("sweep")) {
    Obj so(*s, "sweep");
    c.sweep.enabled = true;
    c.sweep.forms = so.str_list("forms");
    c.sweep.interpreted = so.str_list("interpreted");
    if (const json* lp = so.child("linear_pick")) {
      if (!lp->is_array()) bad("sweep.linear_pick must be an array of arrays");
      for (std::size_t i = 0; i < lp->size(); ++i) {
        const json& e = (*lp)[i];
        if (!e.is_array()) bad("sweep.linear_pick must be an array of arrays");
        std::vector<std::string> pick;
        for (const auto& p : e) {
          if (!p.is_string()) bad("sweep.linear_pick entries must be strings");
          pick.push_back(p.get<std::string>());
        }
        c.sweep.linear_pick.push_back(std::move(pick));
      }
    }
    c.sweep.p_u = so.num_list("p_u");
    if (const json* ar = so.child("architectures")) {
      if (!ar->is_array()) bad("sweep.architectures must be an array");
      for (std::size_t i = 0; i < ar->size(); ++i) {
        const std::string path = "sweep.architectures[" + std::to_string(i) + "]";
        Obj ao((*ar)[i], path);
        std::string arch_name = ao.str("name", "");
        const json* ls = ao.child("layers");
        if (!ls) bad(path + " needs layers");
        c.sweep.architectures.emplace_back(std::move(arch_name),
                                           parse_layers(*ls, path + ".layers"));
        ao.finish();
      }
    }
    so.finish();
  }
  c.checkpoint_in = o.str("checkpoint_in", "");
  c.threshold_in = o.str("threshold_in", "");
  o.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path));
}

std::string config_echo(const RunConfig& c) {
  json j;
  j["task"] = c.task;
  j["dataset"] = c.dataset;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["sqrt_response"] = c.sqrt_response;
  j["pp"]["n_y"] = c.n_y;
  j["pp"]["p_u"] = c.p_u;
  j["pp"]["variant"] = c.variant == evt::PpVariant::bgev ? "bgev" : "gev";
  j["pp"]["blend"] = {{"alpha", c.blend.alpha}, {"beta", c.blend.beta},
                      {"p_a", c.blend.p_a},     {"p_b", c.blend.p_b},
                      {"c1", c.blend.c1},       {"c2", c.blend.c2}};
  j["model"]["shared_xi"] = c.shared_xi;
  j["model"]["xi_init"] = c.xi_init;
  json surfaces = json::array();
  for (const auto& sc : c.surfaces) surfaces.push_back(surface_json(sc));
  j["model"]["surfaces"] = surfaces;
  j["train"] = fit_json(c.train);
  j["threshold"]["train"] = fit_json(c.threshold_train);
  if (!c.threshold_surface.empty())
    j["threshold"]["surface"] = surface_json(c.threshold_surface[0]);
  if (c.folds.enabled)
    j["folds"] = {{"k", c.folds.k},
                  {"seed", c.folds.seed},
                  {"block_len", c.folds.block_len},
                  {"validation_fold", c.folds.validation_fold}};
  if (c.split.enabled)
    j["split"] = {{"train_fraction", c.split.train_fraction},
                  {"seed", c.split.seed}};
  j["bootstrap"] = {{"b", c.bootstrap.b},
                    {"mean_block_len", c.bootstrap.mean_block_len},
                    {"seed", c.bootstrap.seed}};
  j["metrics"] = {{"stls_p", c.metrics.stls_p},
                  {"smad_p1", c.metrics.smad_p1},
                  {"twcrps", c.metrics.twcrps}};
  j["pred_quantiles"] = c.pred_quantiles;
  if (c.scenario.n > 0)
    j["simulate"] = {{"study", study_name(c.scenario.study)},
                     {"n", c.scenario.n},
                     {"seed", c.scenario.seed},
                     {"coeff_seed", c.scenario.coeff_seed}};
  if (c.sweep.enabled) {
    json s;
    s["forms"] = c.sweep.forms;
    s["interpreted"] = c.sweep.interpreted;
    s["linear_pick"] = c.sweep.linear_pick;
    s["p_u"] = c.sweep.p_u;
    json archs = json::array();
    for (const auto& [arch_name, layers] : c.sweep.architectures) {
      json a;
      a["name"] = arch_name;
      json ls = json::array();
      for (const auto& l : layers) ls.push_back(layer_json(l));
      a["layers"] = ls;
      archs.push_back(a);
    }
    s["architectures"] = archs;
    j["sweep"] = s;
  }
  if (!c.checkpoint_in.empty()) j["checkpoint_in"] = c.checkpoint_in;
  if (!c.threshold_in.empty()) j["threshold_in"] = c.threshold_in;
  return j.dump(2) + "\n";
}

SurfaceSpec resolve_surface(const SurfaceConfig& sc,
                            const std::vector<std::string>& predictor_names) {
  auto idx = [&](const std::string& p) -> int {
    for (std::size_t k = 0; k < predictor_names.size(); ++k)
      if (predictor_names[k] == p) return (int)k;
    bad("surface '" + sc.name + "': unknown predictor '" + p + "'");
  };
  SurfaceSpec s;
  s.name = sc.name;
  s.link = link_from_name(sc.link);
  for (const auto& p : sc.linear) s.linear.push_back(idx(p));
  for (const auto& p : sc.additive) s.additive.push_back(idx(p));
  for (const auto& p : sc.net) s.net.push_back(idx(p));
  s.knots = sc.knots;
  s.lambda = sc.lambda;
  s.layers = sc.layers;
  return s;
}

ModelSpec resolve_model(const RunConfig& c,
                        const std::vector<std::string>& predictor_names) {
  ModelSpec m;
  for (const auto& sc : c.surfaces)
    m.surfaces.push_back(resolve_surface(sc, predictor_names));
  m.shared_xi = c.shared_xi;
  m.xi_init = c.xi_init;
  return m;
}

}  // namespace evreg
