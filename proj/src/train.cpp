#include "evreg/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <utility>

#include "evreg/hash.hpp"
#include "evreg/objectives.hpp"
#include "evreg/stats.hpp"

namespace evreg {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_name(const std::string& name) {
  if (name.empty()) throw std::invalid_argument("checkpoint: empty array name");
  for (char c : name) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t')
      throw std::invalid_argument("checkpoint: whitespace in array name");
  }
}

Checkpoint make_checkpoint(const CompiledModel& model, std::int64_t epoch,
                           double loss) {
  Checkpoint out;
  const ParamStore& store = model.params();
  out.blocks.reserve(static_cast<std::size_t>(store.count()));
  for (int i = 0; i < store.count(); ++i) {
    const ParamStore::Block& b = store.block(i);
    out.blocks.push_back({b.name, b.value, b.opt.m, b.opt.v, b.opt.t});
  }
  out.aux = model.aux_arrays();
  out.epoch = epoch;
  out.loss = loss;
  out.fingerprint = model_fingerprint(model);
  return out;
}

void append_f64(std::string& buf, double x) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, sizeof(bits));
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, sizeof(x));
  return x;
}

void append_array(std::string& buf, const Eigen::ArrayXXd& a) {
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) append_f64(buf, a(i, j));
}

void read_array(const unsigned char*& p, Eigen::ArrayXXd& a) {
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) {
      a(i, j) = read_f64(p);
      p += 8;
    }
}

}  // namespace

void FitConfig::validate() const {
  check(epochs >= 1, "FitConfig: epochs must be >= 1");
  check(stride >= 1, "FitConfig: stride must be >= 1");
  check(adam.lr > 0.0, "FitConfig: learning rate must be positive");
}

std::string model_fingerprint(const CompiledModel& model) {
  const ParamStore& store = model.params();
  std::uint64_t h = kFnvOffset;
  h = fnv1a64_u64(static_cast<std::uint64_t>(store.count()), h);
  for (int i = 0; i < store.count(); ++i) {
    const ParamStore::Block& b = store.block(i);
    h = fnv1a64(b.name, h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(b.value.rows()), h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(b.value.cols()), h);
  }
  const auto aux = model.aux_arrays();
  h = fnv1a64_u64(aux.size(), h);
  for (const auto& [name, arr] : aux) {
    h = fnv1a64(name, h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(arr.rows()), h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(arr.cols()), h);
  }
  return hex64(h);
}

FitResult fit(CompiledModel& model, const LossFn& train_loss,
              const EvalFn& valid_loss, const FitConfig& cfg) {
  cfg.validate();
  check(static_cast<bool>(train_loss), "fit: training loss required");
  check(cfg.selection != Selection::validation_loss ||
            static_cast<bool>(valid_loss),
        "fit: validation selection needs a validation evaluator");

  ParamStore& store = model.params();
  FitReport rep;

  struct Saved {
    std::vector<Eigen::ArrayXXd> value, m, v;
    std::vector<std::int64_t> t;
    std::int64_t epoch = 0;
    double loss = 0.0;
  } saved;

  auto take_snapshot = [&](std::int64_t epoch, double loss) {
    saved.value.clear();
    saved.m.clear();
    saved.v.clear();
    saved.t.clear();
    for (int i = 0; i < store.count(); ++i) {
      const ParamStore::Block& b = store.block(i);
      saved.value.push_back(b.value);
      saved.m.push_back(b.opt.m);
      saved.v.push_back(b.opt.v);
      saved.t.push_back(b.opt.t);
    }
    saved.epoch = epoch;
    saved.loss = loss;
    rep.saved_epochs.push_back(epoch);
    rep.saved_losses.push_back(loss);
  };

  for (std::int64_t step = 0;; ++step) {
    ad::Tape tape;
    const BuiltModel bm = model.build(tape);
    const ad::Var loss = train_loss(tape, bm);
    const double train_val = tape.scalar(loss);
    rep.train_loss.push_back(train_val);
    double valid_val = std::numeric_limits<double>::quiet_NaN();
    if (valid_loss) {
      valid_val = valid_loss();
      rep.valid_loss.push_back(valid_val);
    }
    const double criterion =
        cfg.selection == Selection::training_loss ? train_val : valid_val;

    if (step == 0) {
      if (!std::isfinite(train_val))
        throw std::runtime_error("fit: non-finite training loss at initialization");
      take_snapshot(0, criterion);
    } else if (!std::isfinite(train_val)) {
      rep.diverged = true;
      rep.divergence_epoch = step;
      break;
    } else if (step % cfg.stride == 0 && criterion < saved.loss) {
      take_snapshot(step, criterion);
    }
    if (step == cfg.epochs) break;

    tape.backward(loss);
    for (int i = 0; i < store.count(); ++i) {
      ParamStore::Block& b = store.block(i);
      Eigen::ArrayXXd zero;
      const ad::Arr* g = nullptr;
      if (tape.has_grad(bm.leaves[static_cast<std::size_t>(i)])) {
        g = &tape.grad(bm.leaves[static_cast<std::size_t>(i)]);
      } else {
        zero.setZero(b.value.rows(), b.value.cols());
        g = &zero;
      }
      AdamState st;
      st.m.swap(b.opt.m);
      st.v.swap(b.opt.v);
      st.t = b.opt.t;
      adam_step(b.value, *g, st, cfg.adam);
      b.opt.m.swap(st.m);
      b.opt.v.swap(st.v);
      b.opt.t = st.t;
    }
  }

  // The final model is the last saved state regardless of where the loop
  // stopped.
  for (int i = 0; i < store.count(); ++i) {
    ParamStore::Block& b = store.block(i);
    b.value = saved.value[static_cast<std::size_t>(i)];
    b.opt.m = saved.m[static_cast<std::size_t>(i)];
    b.opt.v = saved.v[static_cast<std::size_t>(i)];
    b.opt.t = saved.t[static_cast<std::size_t>(i)];
  }
  rep.best_epoch = saved.epoch;
  rep.best_loss = saved.loss;

  FitResult out;
  out.checkpoint = make_checkpoint(model, saved.epoch, saved.loss);
  out.report = std::move(rep);
  return out;
}

void warm_start(CompiledModel& model, const Checkpoint& ckpt) {
  if (model_fingerprint(model) != ckpt.fingerprint)
    throw std::invalid_argument("warm_start: architecture fingerprint mismatch");
  ParamStore& store = model.params();
  check(store.count() == static_cast<int>(ckpt.blocks.size()),
        "warm_start: block count mismatch");
  for (int i = 0; i < store.count(); ++i) {
    ParamStore::Block& b = store.block(i);
    const Checkpoint::Block& cb = ckpt.blocks[static_cast<std::size_t>(i)];
    check(b.name == cb.name && b.value.rows() == cb.value.rows() &&
              b.value.cols() == cb.value.cols(),
          "warm_start: block name or shape mismatch");
    b.value = cb.value;
  }
  store.reset_opt();
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string env;
  env += "evreg-checkpoint 1\n";
  env += "fingerprint " + ckpt.fingerprint + "\n";
  env += "epoch " + std::to_string(ckpt.epoch) + "\n";
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%a", ckpt.loss);
  env += std::string("loss ") + buf + "\n";
  env += "blocks " + std::to_string(ckpt.blocks.size()) + "\n";
  std::size_t n_doubles = 0;
  for (const Checkpoint::Block& b : ckpt.blocks) {
    check_name(b.name);
    if (b.t > 0) {
      check(b.m.rows() == b.value.rows() && b.m.cols() == b.value.cols() &&
                b.v.rows() == b.value.rows() && b.v.cols() == b.value.cols(),
            "save_checkpoint: optimizer moment shape mismatch");
    }
    env += "b " + b.name + " " + std::to_string(b.value.rows()) + " " +
           std::to_string(b.value.cols()) + " " + std::to_string(b.t) + "\n";
    n_doubles += static_cast<std::size_t>(b.value.size());
    if (b.t > 0) n_doubles += 2 * static_cast<std::size_t>(b.value.size());
  }
  env += "aux " + std::to_string(ckpt.aux.size()) + "\n";
  for (const auto& [name, arr] : ckpt.aux) {
    check_name(name);
    env += "a " + name + " " + std::to_string(arr.rows()) + " " +
           std::to_string(arr.cols()) + "\n";
    n_doubles += static_cast<std::size_t>(arr.size());
  }
  env += "payload " + std::to_string(n_doubles) + "\n";

  std::string payload;
  payload.reserve(8 * n_doubles);
  for (const Checkpoint::Block& b : ckpt.blocks) {
    append_array(payload, b.value);
    if (b.t > 0) {
      append_array(payload, b.m);
      append_array(payload, b.v);
    }
  }
  for (const auto& [name, arr] : ckpt.aux) {
    (void)name;
    append_array(payload, arr);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
    out.write(env.data(), static_cast<std::streamsize>(env.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("save_checkpoint: write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_checkpoint: rename failed: " + path);
}

namespace {

// Pulls the next newline-terminated line out of raw starting at pos.
std::string next_line(const std::string& raw, std::size_t& pos) {
  const std::size_t end = raw.find('\n', pos);
  if (end == std::string::npos)
    throw std::runtime_error("load_checkpoint: truncated envelope");
  std::string line = raw.substr(pos, end - pos);
  pos = end + 1;
  return line;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

long parse_long(const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw std::runtime_error("load_checkpoint: bad integer field: " + s);
  return v;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto expect = [&](const char* tag, std::size_t n_fields) {
    const std::vector<std::string> f = split_ws(next_line(raw, pos));
    if (f.size() != n_fields || f[0] != tag)
      throw std::runtime_error(std::string("load_checkpoint: expected ") + tag);
    return f;
  };

  const auto magic = expect("evreg-checkpoint", 2);
  if (magic[1] != "1")
    throw std::runtime_error("load_checkpoint: unsupported version " + magic[1]);

  Checkpoint out;
  out.fingerprint = expect("fingerprint", 2)[1];
  out.epoch = parse_long(expect("epoch", 2)[1]);
  {
    const std::string s = expect("loss", 2)[1];
    char* end = nullptr;
    out.loss = std::strtod(s.c_str(), &end);
    if (end == s.c_str())
      throw std::runtime_error("load_checkpoint: bad loss field: " + s);
  }

  const long n_blocks = parse_long(expect("blocks", 2)[1]);
  std::size_t n_doubles = 0;
  for (long k = 0; k < n_blocks; ++k) {
    const auto f = expect("b", 5);
    Checkpoint::Block b;
    b.name = f[1];
    const long rows = parse_long(f[2]);
    const long cols = parse_long(f[3]);
    b.t = parse_long(f[4]);
    if (rows < 0 || cols < 0 || b.t < 0)
      throw std::runtime_error("load_checkpoint: bad block header");
    b.value.resize(rows, cols);
    n_doubles += static_cast<std::size_t>(rows * cols);
    if (b.t > 0) {
      b.m.resize(rows, cols);
      b.v.resize(rows, cols);
      n_doubles += 2 * static_cast<std::size_t>(rows * cols);
    }
    out.blocks.push_back(std::move(b));
  }
  const long n_aux = parse_long(expect("aux", 2)[1]);
  for (long k = 0; k < n_aux; ++k) {
    const auto f = expect("a", 4);
    const long rows = parse_long(f[2]);
    const long cols = parse_long(f[3]);
    if (rows < 0 || cols < 0)
      throw std::runtime_error("load_checkpoint: bad aux header");
    Eigen::ArrayXXd arr(rows, cols);
    n_doubles += static_cast<std::size_t>(rows * cols);
    out.aux.emplace_back(f[1], std::move(arr));
  }
  const long declared = parse_long(expect("payload", 2)[1]);
  if (declared < 0 || static_cast<std::size_t>(declared) != n_doubles)
    throw std::runtime_error("load_checkpoint: payload count mismatch");
  if (raw.size() - pos != 8 * n_doubles)
    throw std::runtime_error("load_checkpoint: payload size mismatch");

  const unsigned char* p =
      reinterpret_cast<const unsigned char*>(raw.data()) + pos;
  for (Checkpoint::Block& b : out.blocks) {
    read_array(p, b.value);
    if (b.t > 0) {
      read_array(p, b.m);
      read_array(p, b.v);
    }
  }
  for (auto& [name, arr] : out.aux) {
    (void)name;
    read_array(p, arr);
  }
  return out;
}

std::vector<double> default_intercept_init(const ModelSpec& spec,
                                           const Eigen::ArrayXd& y) {
  check(y.size() > 0, "default_intercept_init: empty responses");
  std::vector<double> out;
  out.reserve(spec.surfaces.size());
  for (const SurfaceSpec& s : spec.surfaces) {
    switch (s.link) {
      case Link::identity:
        out.push_back(median(y));
        break;
      case Link::exponential:
        out.push_back(std::log(std::max(iqr(y), 1e-6)));
        break;
      case Link::logistic: {
        const double p = std::min(std::max(y.mean(), 1e-3), 1.0 - 1e-3);
        out.push_back(std::log(p / (1.0 - p)));
        break;
      }
    }
  }
  return out;
}

ThresholdResult estimate_threshold(CompiledModel& model,
                                   const Eigen::ArrayXd& y_cells,
                                   const std::vector<int>& fit_cells,
                                   double p_u, const FitConfig& cfg) {
  check(p_u > 0.0 && p_u < 1.0, "estimate_threshold: p_u must be in (0,1)");
  check(model.spec().surfaces.size() == 1,
        "estimate_threshold: quantile model must have exactly one surface");
  check(!fit_cells.empty(), "estimate_threshold: no cells to fit on");
  check(y_cells.size() == model.layout().n_cells(),
        "estimate_threshold: responses must cover every grid cell");

  auto rows = std::make_shared<std::vector<int>>();
  auto y_sub = std::make_shared<ad::Arr>(
      static_cast<long>(fit_cells.size()), 1);
  rows->reserve(fit_cells.size());
  for (std::size_t k = 0; k < fit_cells.size(); ++k) {
    const int cell = fit_cells[k];
    check(cell >= 0 && cell < model.layout().n_cells(),
          "estimate_threshold: cell index out of range");
    const int row = model.theta_row(cell);
    check(row >= 0, "estimate_threshold: cell outside the model's valid set");
    rows->push_back(row);
    (*y_sub)(static_cast<long>(k), 0) = y_cells(cell);
  }

  const LossFn loss = [rows, y_sub, p_u](ad::Tape& tape, const BuiltModel& bm) {
    const ad::Var q = tape.gather_rows(bm.theta[0], rows);
    return tape.add(tilted_loss(tape, q, y_sub, p_u), bm.penalty);
  };

  ThresholdResult out;
  out.fit = fit(model, loss, EvalFn{}, cfg);
  out.u = model.eval_theta()[0];
  return out;
}

}  // namespace evreg
