#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "evreg/adam.hpp"
#include "evreg/gradcheck.hpp"
#include "evreg/rng.hpp"
#include "evreg/special.hpp"
#include "evreg/tape.hpp"

using evreg::AdamConfig;
using evreg::AdamState;
using evreg::GradCheckReport;
using evreg::Rng;
using evreg::ad::Arr;
using evreg::ad::Tape;
using evreg::ad::Var;

namespace {

bool bitwise_equal(const Arr& a, const Arr& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a == b).all();
}

// A tiny straight-line program over tape ops, replayable against any leaf
// values so the same graph can be probed by finite differences.
struct Step {
  int op = 0;
  int a = 0;
  int b = 0;
  double c0 = 0.0;
  double c1 = 0.0;
};

struct Program {
  std::vector<std::pair<int, int>> leaf_shapes;
  std::vector<Step> steps;
};

Var replay(Tape& t, const Program& prog, const std::vector<Arr>& leaves, std::vector<Var>* leaf_vars) {
  std::vector<Var> vars;
  for (const Arr& L : leaves) vars.push_back(t.leaf(L));
  if (leaf_vars) *leaf_vars = vars;
  for (const Step& s : prog.steps) {
    Var a = vars[static_cast<std::size_t>(s.a)];
    Var b = vars[static_cast<std::size_t>(s.b)];
    Var out;
    switch (s.op) {
      case 0: out = t.add(a, b); break;
      case 1: out = t.sub(a, b); break;
      case 2: out = t.scale_shift(t.mul(a, b), 0.5, 0.0); break;
      case 3: out = t.div(a, t.add(t.sigmoid(b), t.constant(0.5))); break;
      case 4: out = t.scale_shift(a, s.c0, s.c1); break;
      case 5: out = t.pow_const(t.add(t.sigmoid(a), t.constant(0.5)), s.c0); break;
      case 6: out = t.exp(t.scale_shift(t.sigmoid(a), 2.0, -1.0)); break;
      case 7: out = t.log(t.add(t.sigmoid(a), t.constant(0.5))); break;
      case 8: out = t.reciprocal(t.add(t.sigmoid(a), t.constant(0.5))); break;
      case 9: out = t.sigmoid(a); break;
      case 10: out = t.ibeta(t.sigmoid(a), 3.5, 4.2); break;
      case 11: out = t.relu(a); break;
      case 12: out = t.clamp_min(a, -100.0); break;
      case 13: out = t.clamp_max(a, 100.0); break;
      default: out = a; break;
    }
    vars.push_back(out);
  }
  return t.mean(t.sigmoid(t.scale_shift(vars.back(), 0.1, 0.0)));
}

Program random_program(Rng& rng) {
  Program p;
  p.leaf_shapes = {{3, 2}, {3, 2}, {1, 1}};
  const int n_steps = 4 + static_cast<int>(rng.below(5));
  int n_vars = 3;
  for (int s = 0; s < n_steps; ++s) {
    Step st;
    st.op = static_cast<int>(rng.below(14));
    st.a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_vars)));
    st.b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_vars)));
    if (st.op == 4) {
      st.c0 = rng.uniform(-2.0, 2.0);
      st.c1 = rng.uniform(-1.0, 1.0);
    } else if (st.op == 5) {
      const double powers[4] = {1.7, 2.0, 3.0, -1.3};
      st.c0 = powers[rng.below(4)];
    }
    p.steps.push_back(st);
    ++n_vars;
  }
  return p;
}

std::vector<Arr> random_leaves(const Program& prog, Rng& rng) {
  std::vector<Arr> leaves;
  for (auto [r, c] : prog.leaf_shapes) {
    Arr L(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) L(i, j) = rng.uniform(-1.5, 1.5);
    leaves.push_back(std::move(L));
  }
  return leaves;
}

std::vector<Arr> analytic_grads(const Program& prog, const std::vector<Arr>& leaves) {
  Tape t;
  std::vector<Var> lv;
  Var root = replay(t, prog, leaves, &lv);
  t.backward(root);
  std::vector<Arr> grads;
  for (std::size_t i = 0; i < lv.size(); ++i)
    grads.push_back(t.has_grad(lv[i]) ? t.grad(lv[i]) : Arr(Arr::Zero(leaves[i].rows(), leaves[i].cols())));
  return grads;
}

GradCheckReport check_program(const Program& prog, const std::vector<Arr>& leaves) {
  auto f = [&prog](const std::vector<Arr>& ps) {
    Tape t;
    return t.scalar(replay(t, prog, ps, nullptr));
  };
  return evreg::grad_check(f, leaves, analytic_grads(prog, leaves));
}

}  // namespace

TEST_CASE("adam reproduces the frozen quadratic trajectory") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Arr x(1, 1);
  x(0, 0) = 1.0;
  AdamState st;
  const double expected[3] = {0.9000000005, 0.80041222869179215, 0.70158627294602955};
  for (int k = 0; k < 3; ++k) {
    Arr g = 2.0 * x;
    evreg::adam_step(x, g, st, cfg);
    CHECK(x(0, 0) == doctest::Approx(expected[k]).epsilon(1e-14));
  }
  CHECK(st.t == 3);

  Arr bad(2, 1);
  bad.setZero();
  CHECK_THROWS_AS(evreg::adam_step(bad, x, st, cfg), std::invalid_argument);
}

TEST_CASE("random elementwise graphs agree with central differences") {
  Rng rng(0x5eedfeedULL);
  int informative = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    Program prog = random_program(rng);
    std::vector<Arr> leaves = random_leaves(prog, rng);
    GradCheckReport rep_out = check_program(prog, leaves);
    if (!rep_out.pass) {
      CAPTURE(rep);
      CAPTURE(rep_out.max_rel_err);
      REQUIRE(rep_out.pass);
    }
    if (rep_out.max_rel_err > 0.0 || rep_out.checked > 0) ++informative;
  }
  CHECK(informative == 1000);
}

TEST_CASE("matmul and affine gradients agree with central differences") {
  Rng rng(77);
  Arr X(5, 3), W(3, 4), B(1, 4);
  for (Eigen::Index j = 0; j < 3; ++j)
    for (Eigen::Index i = 0; i < 5; ++i) X(i, j) = rng.uniform(-1.0, 1.0);
  for (Eigen::Index j = 0; j < 4; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) W(i, j) = rng.uniform(-1.0, 1.0);
  for (Eigen::Index j = 0; j < 4; ++j) B(0, j) = rng.uniform(-0.5, 0.5);

  SUBCASE("matmul") {
    auto f = [](const std::vector<Arr>& ps) {
      Tape t;
      return t.scalar(t.mean(t.matmul(t.leaf(ps[0]), t.leaf(ps[1]))));
    };
    Tape t;
    Var x = t.leaf(X), w = t.leaf(W);
    t.backward(t.mean(t.matmul(x, w)));
    GradCheckReport rep = evreg::grad_check(f, {X, W}, {t.grad(x), t.grad(w)});
    CHECK(rep.pass);
    CHECK(rep.checked == 27);
  }

  SUBCASE("affine") {
    auto f = [](const std::vector<Arr>& ps) {
      Tape t;
      return t.scalar(t.mean(t.sigmoid(t.affine(t.leaf(ps[0]), t.leaf(ps[1]), t.leaf(ps[2])))));
    };
    Tape t;
    Var x = t.leaf(X), w = t.leaf(W), b = t.leaf(B);
    t.backward(t.mean(t.sigmoid(t.affine(x, w, b))));
    GradCheckReport rep = evreg::grad_check(f, {X, W, B}, {t.grad(x), t.grad(w), t.grad(b)});
    CHECK(rep.pass);
  }

  SUBCASE("fused affine_relu") {
    auto f = [](const std::vector<Arr>& ps) {
      Tape t;
      return t.scalar(t.mean(t.affine_relu(t.leaf(ps[0]), t.leaf(ps[1]), t.leaf(ps[2]))));
    };
    Tape t;
    Var x = t.leaf(X), w = t.leaf(W), b = t.leaf(B);
    t.backward(t.mean(t.affine_relu(x, w, b)));
    GradCheckReport rep = evreg::grad_check(f, {X, W, B}, {t.grad(x), t.grad(w), t.grad(b)});
    CHECK(rep.pass);

    // Fused op matches the composed form, values and gradients both.
    Tape t2;
    Var x2 = t2.leaf(X), w2 = t2.leaf(W), b2 = t2.leaf(B);
    t2.backward(t2.mean(t2.relu(t2.affine(x2, w2, b2))));
    CHECK(bitwise_equal(t.grad(x), t2.grad(x2)));
    CHECK(bitwise_equal(t.grad(w), t2.grad(w2)));
    CHECK(bitwise_equal(t.grad(b), t2.grad(b2)));
  }
}

TEST_CASE("im2col matches a hand-built patch matrix and its gradient checks out") {
  const int h = 4, w = 5, ch = 2, d = 3;
  Rng rng(123);
  Arr maps(h * w, ch);
  for (Eigen::Index j = 0; j < ch; ++j)
    for (Eigen::Index i = 0; i < h * w; ++i) maps(i, j) = rng.uniform(-1.0, 1.0);

  Tape t;
  Var m = t.leaf(maps);
  Var cols = t.im2col(m, h, w, d, d);
  CHECK(t.val(cols).rows() == h * w);
  CHECK(t.val(cols).cols() == d * d * ch);

  // Every output entry is the zero-padded neighbour value.
  const Arr& C = t.val(cols);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int cch = 0; cch < ch; ++cch)
        for (int dr = 0; dr < d; ++dr)
          for (int dc = 0; dc < d; ++dc) {
            const int rr = r + dr - 1, cc = c + dc - 1;
            const double want =
                (rr >= 0 && rr < h && cc >= 0 && cc < w) ? maps(rr * w + cc, cch) : 0.0;
            CHECK(C(r * w + c, cch * d * d + dr * d + dc) == want);
          }

  Arr Wt(d * d * ch, 1);
  for (Eigen::Index i = 0; i < Wt.rows(); ++i) Wt(i, 0) = rng.uniform(-0.6, 0.6);
  auto f = [&](const std::vector<Arr>& ps) {
    Tape tt;
    return tt.scalar(tt.mean(tt.sigmoid(tt.matmul(tt.im2col(tt.leaf(ps[0]), h, w, d, d), tt.leaf(ps[1])))));
  };
  Tape t3;
  Var m3 = t3.leaf(maps), w3 = t3.leaf(Wt);
  t3.backward(t3.mean(t3.sigmoid(t3.matmul(t3.im2col(m3, h, w, d, d), w3))));
  GradCheckReport rep = evreg::grad_check(f, {maps, Wt}, {t3.grad(m3), t3.grad(w3)});
  CHECK(rep.pass);
  CHECK(rep.checked == h * w * ch + d * d * ch);

  Tape t4;
  CHECK_THROWS_AS(t4.im2col(t4.leaf(maps), h, w, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(t4.im2col(t4.leaf(maps), h + 1, w, 3, 3), std::invalid_argument);
}

TEST_CASE("gather_rows scatter-adds duplicate rows and concat_rows splits its adjoint") {
  Arr A(5, 3);
  Rng rng(9);
  for (Eigen::Index j = 0; j < 3; ++j)
    for (Eigen::Index i = 0; i < 5; ++i) A(i, j) = rng.uniform(-1.0, 1.0);
  auto rows = std::make_shared<std::vector<int>>(std::vector<int>{0, 2, 2, 4});

  Tape t;
  Var a = t.leaf(A);
  Var g = t.gather_rows(a, rows);
  CHECK(t.val(g).rows() == 4);
  CHECK(t.val(g).row(1).isApprox(A.row(2).array()));
  t.backward(t.reduce_sum(g));
  const Arr& ga = t.grad(a);
  CHECK(ga(0, 0) == 1.0);
  CHECK(ga(1, 0) == 0.0);
  CHECK(ga(2, 1) == 2.0);
  CHECK(ga(4, 2) == 1.0);

  Arr B1(2, 3), B2(3, 3);
  B1.setConstant(0.5);
  B2.setConstant(-0.25);
  auto f = [&](const std::vector<Arr>& ps) {
    Tape tt;
    Var v = tt.concat_rows({tt.leaf(ps[0]), tt.leaf(ps[1])});
    return tt.scalar(tt.mean(tt.mul(v, v)));
  };
  Tape t2;
  Var b1 = t2.leaf(B1), b2 = t2.leaf(B2);
  Var cat = t2.concat_rows({b1, b2});
  t2.backward(t2.mean(t2.mul(cat, cat)));
  GradCheckReport rep = evreg::grad_check(f, {B1, B2}, {t2.grad(b1), t2.grad(b2)});
  CHECK(rep.pass);
}

TEST_CASE("ibeta gradient is the beta density") {
  Arr x(1, 3);
  x << 0.3, 0.62, 0.9;
  Tape t;
  Var v = t.leaf(x);
  Var y = t.ibeta(v, 5.0, 5.0);
  CHECK(t.val(y)(0, 0) == doctest::Approx(0.09880866).epsilon(1e-12));
  t.backward(t.reduce_sum(y));
  for (int j = 0; j < 3; ++j)
    CHECK(t.grad(v)(0, j) == doctest::Approx(evreg::beta_pdf(x(0, j), 5.0, 5.0)).epsilon(1e-12));

  // Outside the clamp the map is flat, so the gradient vanishes.
  Arr xo(1, 2);
  xo << -0.4, 1.3;
  Tape t2;
  Var vo = t2.leaf(xo);
  Var yo = t2.ibeta(vo, 5.0, 5.0);
  CHECK(t2.val(yo)(0, 0) == 0.0);
  CHECK(t2.val(yo)(0, 1) == 1.0);
  t2.backward(t2.reduce_sum(yo));
  CHECK(t2.grad(vo)(0, 0) == 0.0);
  CHECK(t2.grad(vo)(0, 1) == 0.0);
}

TEST_CASE("scalar leaves absorb broadcast adjoints by reduction") {
  Arr M(4, 2);
  M << 1.0, -2.0, 3.0, 0.5, -1.5, 2.5, 0.25, -0.75;
  Arr s(1, 1);
  s(0, 0) = 0.7;
  Tape t;
  Var ms = t.constant(M);
  Var sv = t.leaf(s);
  t.backward(t.mean(t.mul(sv, ms)));
  CHECK(t.grad(sv)(0, 0) == doctest::Approx(M.mean()).epsilon(1e-15));
}

TEST_CASE("kink exclusion skips relu entries that straddle zero") {
  Arr x(1, 3);
  x << -0.5, 1e-9, 0.7;
  auto f = [](const std::vector<Arr>& ps) {
    Tape t;
    return t.scalar(t.mean(t.relu(t.leaf(ps[0]))));
  };
  Tape t;
  Var v = t.leaf(x);
  t.backward(t.mean(t.relu(v)));
  GradCheckReport rep = evreg::grad_check(f, {x}, {t.grad(v)});
  CHECK(rep.pass);
  CHECK(rep.excluded == 1);
  CHECK(rep.checked == 2);
}

TEST_CASE("constant_ref shares the buffer without copying") {
  auto big = std::make_shared<Arr>(Arr::Constant(3, 3, 2.0));
  Tape t;
  Var c = t.constant_ref(big);
  CHECK(&t.val(c) == big.get());
  Var x = t.leaf(Arr::Constant(3, 3, 1.5));
  t.backward(t.mean(t.mul(x, c)));
  CHECK(t.grad(x)(1, 1) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
  CHECK_FALSE(t.has_grad(c));
}

TEST_CASE("reset reuses node storage and reproduces fresh-tape results bitwise") {
  Rng rng(0xabcdefULL);
  Program prog = random_program(rng);
  Tape reused;
  std::size_t size_after_first = 0;
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<Arr> leaves = random_leaves(prog, rng);
    reused.reset();
    std::vector<Var> lv;
    Var root = replay(reused, prog, leaves, &lv);
    reused.backward(root);
    if (epoch == 0)
      size_after_first = reused.size();
    else
      CHECK(reused.size() == size_after_first);

    Tape fresh;
    std::vector<Var> lv2;
    Var root2 = replay(fresh, prog, leaves, &lv2);
    fresh.backward(root2);
    CHECK(reused.scalar(root) == fresh.scalar(root2));
    for (std::size_t i = 0; i < lv.size(); ++i) {
      CHECK(reused.has_grad(lv[i]) == fresh.has_grad(lv2[i]));
      if (reused.has_grad(lv[i])) CHECK(bitwise_equal(reused.grad(lv[i]), fresh.grad(lv2[i])));
    }
  }
}

TEST_CASE("backward runs are bitwise deterministic") {
  Rng rng(0x1234ULL);
  Program prog = random_program(rng);
  std::vector<Arr> leaves = random_leaves(prog, rng);
  std::vector<Arr> g1 = analytic_grads(prog, leaves);
  std::vector<Arr> g2 = analytic_grads(prog, leaves);
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(bitwise_equal(g1[i], g2[i]));
}

TEST_CASE("tape misuse is rejected") {
  Tape t;
  Var m = t.leaf(Arr::Constant(2, 2, 1.0));
  CHECK_THROWS_AS(t.scalar(m), std::logic_error);
  CHECK_THROWS_AS(t.backward(m), std::logic_error);
  CHECK_THROWS_AS(t.grad(m), std::logic_error);
  Var n = t.leaf(Arr::Constant(3, 2, 1.0));
  CHECK_THROWS_AS(t.add(m, n), std::invalid_argument);
  CHECK_THROWS_AS(t.matmul(m, n), std::invalid_argument);
}
