#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

namespace evreg::ad {

using Arr = Eigen::ArrayXXd;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op {
  leaf,
  constant,
  add,
  sub,
  mul,
  div,
  scale_shift,  // c0 * x + c1
  pow_const,
  exp,
  log,
  reciprocal,
  relu,
  sigmoid,
  clamp_min,
  clamp_max,
  ibeta,
  matmul,
  affine,       // x * w + row-broadcast bias
  affine_relu,  // relu(x * w + bias), fused
  im2col,
  reduce_sum,
  gather_rows,
  concat_rows,
};

// Reverse-mode tape over dense double arrays. Values are computed eagerly as
// the graph is built; backward replays the record once. Scalars are 1x1
// arrays, and elementwise binary ops broadcast a 1x1 operand.
//
// reset() rewinds the write cursor without releasing node storage, so a loop
// that rebuilds the same graph shape every iteration reuses all buffers. A
// tape is single-owner: no internal locking.
class Tape {
 public:
  Var leaf(const Arr& v);
  Var constant(const Arr& v);
  Var constant(double v);
  // Shares the caller's buffer instead of copying; the caller keeps it alive.
  Var constant_ref(std::shared_ptr<const Arr> v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale_shift(Var a, double scale, double shift);
  Var neg(Var a) { return scale_shift(a, -1.0, 0.0); }
  Var pow_const(Var a, double p);
  Var exp(Var a);
  Var log(Var a);
  Var reciprocal(Var a);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var clamp_min(Var a, double bound);
  Var clamp_max(Var a, double bound);
  // Regularised incomplete beta of the input clamped to [0,1]; the gradient
  // is the beta density, zero where the clamp saturates.
  Var ibeta(Var x, double c1, double c2);
  Var matmul(Var a, Var b);
  Var affine(Var x, Var w, Var bias);
  Var affine_relu(Var x, Var w, Var bias);
  // Input holds channel maps as (h*w) x channels, cells row-major. Output is
  // (h*w) x (d1*d2*channels): the zero-padded d1 x d2 neighbourhood of every
  // cell, so a stride-one same-size convolution is a matmul on the result.
  Var im2col(Var maps, int h, int w, int d1, int d2);
  Var reduce_sum(Var a);
  Var mean(Var a);
  Var gather_rows(Var a, std::shared_ptr<const std::vector<int>> rows);
  Var concat_rows(const std::vector<Var>& parts);

  const Arr& val(Var v) const { return value_of(v.id); }
  double scalar(Var v) const;
  const Arr& grad(Var v) const;
  bool has_grad(Var v) const;

  // Seeds d(root)/d(root) = 1 and accumulates adjoints for every reachable
  // node; root must be scalar.
  void backward(Var root);

  void reset() { cursor_ = 0; }
  std::size_t size() const { return cursor_; }

 private:
  struct Node {
    Op op = Op::constant;
    int a = -1, b = -1, c = -1;
    double c0 = 0.0, c1 = 0.0;
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
    std::shared_ptr<const std::vector<int>> rows;
    std::vector<int> multi;
    std::shared_ptr<const Arr> ext;
    Arr val;
    Arr aux;
    Arr adj;
    std::uint64_t adj_stamp = 0;
    bool needs_grad = false;
  };

  Node& fresh();
  Var finish(Node&) { return Var{static_cast<int>(cursor_++)}; }
  const Arr& value_of(int id) const;
  bool grad_flows(int id) const { return id >= 0 && nodes_[id].needs_grad; }
  void accumulate(int id, const Arr& contrib);
  void accumulate_scaled_sum(int id, double s);

  std::vector<Node> nodes_;
  std::size_t cursor_ = 0;
  // Starts above the node default stamp so an untouched adjoint never looks
  // current.
  std::uint64_t pass_ = 1;
};

}  // namespace evreg::ad
