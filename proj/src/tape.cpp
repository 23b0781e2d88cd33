#include "evreg/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "evreg/special.hpp"

namespace evreg::ad {

namespace {

bool is_scalar(const Arr& a) { return a.rows() == 1 && a.cols() == 1; }

}  // namespace

const Arr& Tape::value_of(int id) const {
  const Node& n = nodes_[id];
  return n.ext ? *n.ext : n.val;
}

double Tape::scalar(Var v) const {
  const Arr& a = value_of(v.id);
  if (!is_scalar(a)) throw std::logic_error("Tape::scalar: node is not 1x1");
  return a(0, 0);
}

const Arr& Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.adj_stamp != pass_) throw std::logic_error("Tape::grad: no adjoint reached this node");
  return n.adj;
}

bool Tape::has_grad(Var v) const { return nodes_[v.id].adj_stamp == pass_; }

Tape::Node& Tape::fresh() {
  if (cursor_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[cursor_];
  n.rows.reset();
  n.ext.reset();
  n.multi.clear();
  n.a = n.b = n.c = -1;
  n.c0 = n.c1 = 0.0;
  n.i0 = n.i1 = n.i2 = n.i3 = 0;
  n.needs_grad = false;
  return n;
}

Var Tape::leaf(const Arr& v) {
  Node& n = fresh();
  n.op = Op::leaf;
  n.val = v;
  n.needs_grad = true;
  return finish(n);
}

Var Tape::constant(const Arr& v) {
  Node& n = fresh();
  n.op = Op::constant;
  n.val = v;
  return finish(n);
}

Var Tape::constant(double v) {
  Node& n = fresh();
  n.op = Op::constant;
  n.val.resize(1, 1);
  n.val(0, 0) = v;
  return finish(n);
}

Var Tape::constant_ref(std::shared_ptr<const Arr> v) {
  Node& n = fresh();
  n.op = Op::constant;
  n.ext = std::move(v);
  return finish(n);
}

#define EVREG_BINARY_PROLOGUE(OPNAME)                  \
  Node& n = fresh();                                   \
  n.op = Op::OPNAME;                                   \
  n.a = a.id;                                          \
  n.b = b.id;                                          \
  n.needs_grad = grad_flows(a.id) || grad_flows(b.id); \
  const Arr& A = value_of(a.id);                       \
  const Arr& B = value_of(b.id);

Var Tape::add(Var a, Var b) {
  EVREG_BINARY_PROLOGUE(add)
  if (A.rows() == B.rows() && A.cols() == B.cols())
    n.val = A + B;
  else if (is_scalar(A))
    n.val = A(0, 0) + B;
  else if (is_scalar(B))
    n.val = A + B(0, 0);
  else
    throw std::invalid_argument("Tape::add: shape mismatch");
  return finish(n);
}

Var Tape::sub(Var a, Var b) {
  EVREG_BINARY_PROLOGUE(sub)
  if (A.rows() == B.rows() && A.cols() == B.cols())
    n.val = A - B;
  else if (is_scalar(A))
    n.val = A(0, 0) - B;
  else if (is_scalar(B))
    n.val = A - B(0, 0);
  else
    throw std::invalid_argument("Tape::sub: shape mismatch");
  return finish(n);
}

Var Tape::mul(Var a, Var b) {
  EVREG_BINARY_PROLOGUE(mul)
  if (A.rows() == B.rows() && A.cols() == B.cols())
    n.val = A * B;
  else if (is_scalar(A))
    n.val = A(0, 0) * B;
  else if (is_scalar(B))
    n.val = A * B(0, 0);
  else
    throw std::invalid_argument("Tape::mul: shape mismatch");
  return finish(n);
}

Var Tape::div(Var a, Var b) {
  EVREG_BINARY_PROLOGUE(div)
  if (A.rows() == B.rows() && A.cols() == B.cols())
    n.val = A / B;
  else if (is_scalar(A))
    n.val = A(0, 0) / B;
  else if (is_scalar(B))
    n.val = A / B(0, 0);
  else
    throw std::invalid_argument("Tape::div: shape mismatch");
  return finish(n);
}

#undef EVREG_BINARY_PROLOGUE

#define EVREG_UNARY_PROLOGUE(OPNAME)   \
  Node& n = fresh();                   \
  n.op = Op::OPNAME;                   \
  n.a = a.id;                          \
  n.needs_grad = grad_flows(a.id);     \
  const Arr& A = value_of(a.id);

Var Tape::scale_shift(Var a, double scale, double shift) {
  EVREG_UNARY_PROLOGUE(scale_shift)
  n.c0 = scale;
  n.c1 = shift;
  n.val = scale * A + shift;
  return finish(n);
}

Var Tape::pow_const(Var a, double p) {
  EVREG_UNARY_PROLOGUE(pow_const)
  n.c0 = p;
  n.val = A.pow(p);
  return finish(n);
}

Var Tape::exp(Var a) {
  EVREG_UNARY_PROLOGUE(exp)
  n.val = A.exp();
  return finish(n);
}

Var Tape::log(Var a) {
  EVREG_UNARY_PROLOGUE(log)
  n.val = A.log();
  return finish(n);
}

Var Tape::reciprocal(Var a) {
  EVREG_UNARY_PROLOGUE(reciprocal)
  n.val = A.inverse();
  return finish(n);
}

Var Tape::relu(Var a) {
  EVREG_UNARY_PROLOGUE(relu)
  n.val = A.max(0.0);
  return finish(n);
}

Var Tape::sigmoid(Var a) {
  EVREG_UNARY_PROLOGUE(sigmoid)
  n.val = 1.0 / (1.0 + (-A).exp());
  return finish(n);
}

Var Tape::clamp_min(Var a, double bound) {
  EVREG_UNARY_PROLOGUE(clamp_min)
  n.c0 = bound;
  n.val = A.max(bound);
  return finish(n);
}

Var Tape::clamp_max(Var a, double bound) {
  EVREG_UNARY_PROLOGUE(clamp_max)
  n.c0 = bound;
  n.val = A.min(bound);
  return finish(n);
}

Var Tape::ibeta(Var a, double c1, double c2) {
  EVREG_UNARY_PROLOGUE(ibeta)
  n.c0 = c1;
  n.c1 = c2;
  n.val.resize(A.rows(), A.cols());
  n.aux.resize(A.rows(), A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double x = A(i, j);
      n.val(i, j) = ibeta_reg(x, c1, c2);
      n.aux(i, j) = beta_pdf(x, c1, c2);
    }
  return finish(n);
}

Var Tape::matmul(Var a, Var b) {
  Node& n = fresh();
  n.op = Op::matmul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = grad_flows(a.id) || grad_flows(b.id);
  const Arr& A = value_of(a.id);
  const Arr& B = value_of(b.id);
  if (A.cols() != B.rows()) throw std::invalid_argument("Tape::matmul: inner dimensions differ");
  n.val.resize(A.rows(), B.cols());
  n.val.matrix().noalias() = A.matrix() * B.matrix();
  return finish(n);
}

Var Tape::affine(Var x, Var w, Var bias) {
  Node& n = fresh();
  n.op = Op::affine;
  n.a = x.id;
  n.b = w.id;
  n.c = bias.id;
  n.needs_grad = grad_flows(x.id) || grad_flows(w.id) || grad_flows(bias.id);
  const Arr& X = value_of(x.id);
  const Arr& W = value_of(w.id);
  const Arr& Bv = value_of(bias.id);
  if (X.cols() != W.rows() || Bv.rows() != 1 || Bv.cols() != W.cols())
    throw std::invalid_argument("Tape::affine: shape mismatch");
  n.val.resize(X.rows(), W.cols());
  n.val.matrix().noalias() = X.matrix() * W.matrix();
  n.val.matrix().rowwise() += Bv.matrix().row(0);
  return finish(n);
}

Var Tape::affine_relu(Var x, Var w, Var bias) {
  Var pre = affine(x, w, bias);
  Node& n = nodes_[pre.id];
  n.op = Op::affine_relu;
  n.val = n.val.max(0.0);
  return pre;
}

Var Tape::im2col(Var a, int h, int w, int d1, int d2) {
  EVREG_UNARY_PROLOGUE(im2col)
  if (d1 % 2 == 0 || d2 % 2 == 0) throw std::invalid_argument("Tape::im2col: filter dimensions must be odd");
  if (A.rows() != static_cast<Eigen::Index>(h) * w) throw std::invalid_argument("Tape::im2col: rows != h*w");
  n.i0 = h;
  n.i1 = w;
  n.i2 = d1;
  n.i3 = d2;
  const int ch = static_cast<int>(A.cols());
  const int off1 = (d1 - 1) / 2;
  const int off2 = (d2 - 1) / 2;
  n.val.setZero(static_cast<Eigen::Index>(h) * w, static_cast<Eigen::Index>(d1) * d2 * ch);
  for (int c = 0; c < ch; ++c)
    for (int dr = 0; dr < d1; ++dr)
      for (int dc = 0; dc < d2; ++dc) {
        const int col = c * d1 * d2 + dr * d2 + dc;
        for (int r = 0; r < h; ++r) {
          const int rr = r + dr - off1;
          if (rr < 0 || rr >= h) continue;
          for (int cc0 = 0; cc0 < w; ++cc0) {
            const int cc = cc0 + dc - off2;
            if (cc < 0 || cc >= w) continue;
            n.val(static_cast<Eigen::Index>(r) * w + cc0, col) = A(static_cast<Eigen::Index>(rr) * w + cc, c);
          }
        }
      }
  return finish(n);
}

#undef EVREG_UNARY_PROLOGUE

Var Tape::reduce_sum(Var a) {
  Node& n = fresh();
  n.op = Op::reduce_sum;
  n.a = a.id;
  n.needs_grad = grad_flows(a.id);
  const Arr& A = value_of(a.id);
  n.val.resize(1, 1);
  n.val(0, 0) = A.sum();
  return finish(n);
}

Var Tape::mean(Var a) {
  const Arr& A = value_of(a.id);
  const double inv = 1.0 / static_cast<double>(A.size());
  return scale_shift(reduce_sum(a), inv, 0.0);
}

Var Tape::gather_rows(Var a, std::shared_ptr<const std::vector<int>> rows) {
  Node& n = fresh();
  n.op = Op::gather_rows;
  n.a = a.id;
  n.needs_grad = grad_flows(a.id);
  const Arr& A = value_of(a.id);
  n.rows = std::move(rows);
  n.val.resize(static_cast<Eigen::Index>(n.rows->size()), A.cols());
  for (std::size_t i = 0; i < n.rows->size(); ++i) n.val.row(static_cast<Eigen::Index>(i)) = A.row((*n.rows)[i]);
  return finish(n);
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::concat_rows: empty input");
  Node& n = fresh();
  n.op = Op::concat_rows;
  Eigen::Index total = 0;
  const Eigen::Index cols = value_of(parts[0].id).cols();
  for (const Var& p : parts) {
    if (value_of(p.id).cols() != cols) throw std::invalid_argument("Tape::concat_rows: column mismatch");
    total += value_of(p.id).rows();
    n.multi.push_back(p.id);
    n.needs_grad = n.needs_grad || grad_flows(p.id);
  }
  n.val.resize(total, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    const Arr& P = value_of(p.id);
    n.val.middleRows(at, P.rows()) = P;
    at += P.rows();
  }
  return finish(n);
}

namespace {

// Adjoint accumulation: first contribution assigns, later ones add. A 1x1
// target absorbs larger contributions by total reduction (the broadcast
// transpose). The node type is deduced so it can stay private to the tape.
template <class E>
void accum(auto* nodes, int id, std::uint64_t pass, const E& contrib, Eigen::Index rows, Eigen::Index cols) {
  auto& t = nodes[id];
  const bool scalar_target = (t.ext ? t.ext->rows() : t.val.rows()) == 1 && (t.ext ? t.ext->cols() : t.val.cols()) == 1;
  if (scalar_target && (rows != 1 || cols != 1)) {
    const double s = contrib.sum();
    if (t.adj_stamp != pass) {
      t.adj.resize(1, 1);
      t.adj(0, 0) = s;
      t.adj_stamp = pass;
    } else {
      t.adj(0, 0) += s;
    }
    return;
  }
  if (t.adj_stamp != pass) {
    t.adj = contrib;
    t.adj_stamp = pass;
  } else {
    t.adj += contrib;
  }
}

}  // namespace

void Tape::accumulate(int id, const Arr& contrib) { accum(nodes_.data(), id, pass_, contrib, contrib.rows(), contrib.cols()); }

void Tape::accumulate_scaled_sum(int id, double s) {
  Node& t = nodes_[id];
  const Arr& tv = t.ext ? *t.ext : t.val;
  if (t.adj_stamp != pass_) {
    t.adj.resize(tv.rows(), tv.cols());
    t.adj.setConstant(s);
    t.adj_stamp = pass_;
  } else {
    t.adj += s;
  }
}

void Tape::backward(Var root) {
  if (!root.valid() || static_cast<std::size_t>(root.id) >= cursor_) throw std::logic_error("Tape::backward: bad root");
  if (!is_scalar(value_of(root.id))) throw std::logic_error("Tape::backward: root must be scalar");
  ++pass_;
  Node& r = nodes_[root.id];
  r.adj.resize(1, 1);
  r.adj(0, 0) = 1.0;
  r.adj_stamp = pass_;

  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.adj_stamp != pass_ || !n.needs_grad) continue;
    const Arr& g = n.adj;
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::add: {
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, g, g.rows(), g.cols());
        if (grad_flows(n.b)) accum(nodes_.data(), n.b, pass_, g, g.rows(), g.cols());
        break;
      }
      case Op::sub: {
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, g, g.rows(), g.cols());
        if (grad_flows(n.b)) accum(nodes_.data(), n.b, pass_, (-g).eval(), g.rows(), g.cols());
        break;
      }
      case Op::mul: {
        const Arr& A = value_of(n.a);
        const Arr& B = value_of(n.b);
        if (grad_flows(n.a)) {
          if (is_scalar(B))
            accum(nodes_.data(), n.a, pass_, (g * B(0, 0)).eval(), g.rows(), g.cols());
          else if (is_scalar(A))
            accum(nodes_.data(), n.a, pass_, (g * B).eval(), g.rows(), g.cols());
          else
            accum(nodes_.data(), n.a, pass_, (g * B).eval(), g.rows(), g.cols());
        }
        if (grad_flows(n.b)) {
          if (is_scalar(A))
            accum(nodes_.data(), n.b, pass_, (g * A(0, 0)).eval(), g.rows(), g.cols());
          else
            accum(nodes_.data(), n.b, pass_, (g * A).eval(), g.rows(), g.cols());
        }
        break;
      }
      case Op::div: {
        const Arr& A = value_of(n.a);
        const Arr& B = value_of(n.b);
        if (grad_flows(n.a)) {
          if (is_scalar(B))
            accum(nodes_.data(), n.a, pass_, (g / B(0, 0)).eval(), g.rows(), g.cols());
          else
            accum(nodes_.data(), n.a, pass_, (g / B).eval(), g.rows(), g.cols());
        }
        if (grad_flows(n.b)) {
          if (is_scalar(B))
            accum(nodes_.data(), n.b, pass_, (-g * n.val / B(0, 0)).eval(), g.rows(), g.cols());
          else if (is_scalar(A))
            accum(nodes_.data(), n.b, pass_, (-g * n.val / B).eval(), g.rows(), g.cols());
          else
            accum(nodes_.data(), n.b, pass_, (-g * n.val / B).eval(), g.rows(), g.cols());
        }
        break;
      }
      case Op::scale_shift:
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, (n.c0 * g).eval(), g.rows(), g.cols());
        break;
      case Op::pow_const: {
        if (grad_flows(n.a)) {
          const Arr& A = value_of(n.a);
          const double p = n.c0;
          accum(nodes_.data(), n.a, pass_, (g * p * A.pow(p - 1.0)).eval(), g.rows(), g.cols());
        }
        break;
      }
      case Op::exp:
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, (g * n.val).eval(), g.rows(), g.cols());
        break;
      case Op::log:
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, (g / value_of(n.a)).eval(), g.rows(), g.cols());
        break;
      case Op::reciprocal:
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, (-g * n.val * n.val).eval(), g.rows(), g.cols());
        break;
      case Op::relu:
        if (grad_flows(n.a))
          accum(nodes_.data(), n.a, pass_, (g * (n.val > 0.0).cast<double>()).eval(), g.rows(), g.cols());
        break;
      case Op::sigmoid:
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, (g * n.val * (1.0 - n.val)).eval(), g.rows(), g.cols());
        break;
      case Op::clamp_min:
        if (grad_flows(n.a))
          accum(nodes_.data(), n.a, pass_, (g * (value_of(n.a) > n.c0).cast<double>()).eval(), g.rows(), g.cols());
        break;
      case Op::clamp_max:
        if (grad_flows(n.a))
          accum(nodes_.data(), n.a, pass_, (g * (value_of(n.a) < n.c0).cast<double>()).eval(), g.rows(), g.cols());
        break;
      case Op::ibeta:
        if (grad_flows(n.a)) accum(nodes_.data(), n.a, pass_, (g * n.aux).eval(), g.rows(), g.cols());
        break;
      case Op::matmul: {
        const Arr& A = value_of(n.a);
        const Arr& B = value_of(n.b);
        if (grad_flows(n.a))
          accum(nodes_.data(), n.a, pass_, Arr((g.matrix() * B.matrix().transpose()).array()), A.rows(), A.cols());
        if (grad_flows(n.b))
          accum(nodes_.data(), n.b, pass_, Arr((A.matrix().transpose() * g.matrix()).array()), B.rows(), B.cols());
        break;
      }
      case Op::affine:
      case Op::affine_relu: {
        const Arr& X = value_of(n.a);
        const Arr& W = value_of(n.b);
        Arr gm;
        const Arr* gp = &g;
        if (n.op == Op::affine_relu) {
          gm = g * (n.val > 0.0).cast<double>();
          gp = &gm;
        }
        if (grad_flows(n.a))
          accum(nodes_.data(), n.a, pass_, Arr((gp->matrix() * W.matrix().transpose()).array()), X.rows(), X.cols());
        if (grad_flows(n.b))
          accum(nodes_.data(), n.b, pass_, Arr((X.matrix().transpose() * gp->matrix()).array()), W.rows(), W.cols());
        if (grad_flows(n.c)) accum(nodes_.data(), n.c, pass_, Arr(gp->colwise().sum()), 1, gp->cols());
        break;
      }
      case Op::im2col: {
        if (!grad_flows(n.a)) break;
        const Arr& A = value_of(n.a);
        Arr gin = Arr::Zero(A.rows(), A.cols());
        const int h = n.i0, w = n.i1, d1 = n.i2, d2 = n.i3;
        const int ch = static_cast<int>(A.cols());
        const int off1 = (d1 - 1) / 2;
        const int off2 = (d2 - 1) / 2;
        for (int c = 0; c < ch; ++c)
          for (int dr = 0; dr < d1; ++dr)
            for (int dc = 0; dc < d2; ++dc) {
              const int col = c * d1 * d2 + dr * d2 + dc;
              for (int r = 0; r < h; ++r) {
                const int rr = r + dr - off1;
                if (rr < 0 || rr >= h) continue;
                for (int cc0 = 0; cc0 < w; ++cc0) {
                  const int cc = cc0 + dc - off2;
                  if (cc < 0 || cc >= w) continue;
                  gin(static_cast<Eigen::Index>(rr) * w + cc, c) += g(static_cast<Eigen::Index>(r) * w + cc0, col);
                }
              }
            }
        accumulate(n.a, gin);
        break;
      }
      case Op::reduce_sum:
        if (grad_flows(n.a)) accumulate_scaled_sum(n.a, g(0, 0));
        break;
      case Op::gather_rows: {
        if (!grad_flows(n.a)) break;
        const Arr& A = value_of(n.a);
        Node& t = nodes_[n.a];
        if (t.adj_stamp != pass_) {
          t.adj.setZero(A.rows(), A.cols());
          t.adj_stamp = pass_;
        }
        for (std::size_t k = 0; k < n.rows->size(); ++k)
          t.adj.row((*n.rows)[k]) += g.row(static_cast<Eigen::Index>(k));
        break;
      }
      case Op::concat_rows: {
        Eigen::Index at = 0;
        for (int pid : n.multi) {
          const Arr& P = value_of(pid);
          if (grad_flows(pid))
            accum(nodes_.data(), pid, pass_, Arr(g.middleRows(at, P.rows())), P.rows(), P.cols());
          at += P.rows();
        }
        break;
      }
    }
  }
}

}  // namespace evreg::ad
