#include "evreg/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "evreg/special.hpp"

namespace evreg {

namespace {

using ad::Tape;
using ad::Var;

constexpr double kTiny = 1e-300;
constexpr double kExpCap = 690.0;     // below the overflow threshold of exp
constexpr double kGumbelCap = 50.0;   // caps exp(-(z-mu)/sigma) at ~5e21

double log_neg_log(double x) { return std::log(-std::log(x)); }

// 1x1 quantities derived from the shape variable, shared by every section of
// one likelihood build.
struct ShapeVars {
  Var l_alpha, l_pa, l_pb, delta, inv_xi, one_plus_inv;
};

ShapeVars shape_vars(Tape& tape, Var xi, double alpha, double beta, double p_a, double p_b) {
  // ell_x = (-log x)^(-xi) as exp(-xi log(-log x)).
  const auto ell = [&](double x) { return tape.exp(tape.scale_shift(xi, -log_neg_log(x), 0.0)); };
  ShapeVars sv;
  sv.l_alpha = ell(alpha);
  sv.l_pa = ell(p_a);
  sv.l_pb = ell(p_b);
  sv.delta = tape.sub(ell(1.0 - beta / 2.0), ell(beta / 2.0));
  sv.inv_xi = tape.reciprocal(xi);
  sv.one_plus_inv = tape.scale_shift(sv.inv_xi, 1.0, 1.0);
  return sv;
}

// Tail function pieces at z: arg = 1 + xi (z - mu) / sigma expressed through
// the quantile-spread surface, its log, t = arg^(-1/xi), and the intensity
// power t^(1+xi) = arg^(-1/xi - 1).
struct TailVars {
  Var arg, w, t, t_pow;
};

TailVars tail_vars(Tape& tape, Var q, Var s, Var z, const ShapeVars& sv, bool need_pow) {
  // z - mu = z - q + s (ell_alpha - 1) / delta, and xi/sigma = delta/s.
  Var zmmu = tape.add(tape.sub(z, q),
                      tape.mul(s, tape.mul(tape.scale_shift(sv.l_alpha, 1.0, -1.0), tape.reciprocal(sv.delta))));
  TailVars tv;
  tv.arg = tape.scale_shift(tape.mul(tape.mul(zmmu, sv.delta), tape.reciprocal(s)), 1.0, 1.0);
  tv.w = tape.log(tape.clamp_min(tv.arg, kTiny));
  tv.t = tape.exp(tape.clamp_max(tape.neg(tape.mul(tv.w, sv.inv_xi)), kExpCap));
  if (need_pow) tv.t_pow = tape.exp(tape.clamp_max(tape.neg(tape.mul(tv.w, sv.one_plus_inv)), kExpCap));
  return tv;
}

// Blend pieces at z: boundaries, the pinned lower component, the Beta ramp
// weight and its density.
struct BlendVars {
  Var e_g, sigma_g_inv, p, p_prime;
};

BlendVars blend_vars(Tape& tape, Var q, Var s, Var z, const ShapeVars& sv, const evt::BgevConfig& cfg,
                     bool need_prime) {
  const double ka = log_neg_log(cfg.p_a);
  const double kb = log_neg_log(cfg.p_b);
  Var rdelta = tape.reciprocal(sv.delta);
  Var b1 = tape.add(q, tape.mul(s, tape.mul(tape.sub(sv.l_pa, sv.l_alpha), rdelta)));
  Var b2 = tape.add(q, tape.mul(s, tape.mul(tape.sub(sv.l_pb, sv.l_alpha), rdelta)));
  Var width = tape.sub(b2, b1);
  Var rwidth = tape.reciprocal(width);
  // Lower component pinned through (b1, p_a) and (b2, p_b).
  Var sigma_g = tape.scale_shift(width, 1.0 / (ka - kb), 0.0);
  Var mu_g = tape.add(b1, tape.scale_shift(sigma_g, ka, 0.0));
  BlendVars bv;
  bv.sigma_g_inv = tape.reciprocal(sigma_g);
  bv.e_g = tape.exp(tape.clamp_max(tape.neg(tape.mul(tape.sub(z, mu_g), bv.sigma_g_inv)), kGumbelCap));
  Var v = tape.mul(tape.sub(z, b1), rwidth);
  bv.p = tape.ibeta(v, cfg.c1, cfg.c2);
  if (need_prime) {
    // Beta density through logs; the [0,1] clamp plus the floored logs
    // underflow it to an exact zero outside the window, where it truly is 0.
    Var vv = tape.clamp_min(tape.clamp_max(v, 1.0), 0.0);
    Var lv = tape.log(tape.clamp_min(vv, kTiny));
    Var l1v = tape.log(tape.clamp_min(tape.scale_shift(vv, -1.0, 1.0), kTiny));
    Var log_pdf = tape.scale_shift(
        tape.add(tape.scale_shift(lv, cfg.c1 - 1.0, 0.0), tape.scale_shift(l1v, cfg.c2 - 1.0, 0.0)), 1.0,
        -log_beta(cfg.c1, cfg.c2));
    bv.p_prime = tape.mul(tape.exp(tape.clamp_max(log_pdf, kExpCap)), rwidth);
  }
  return bv;
}

}  // namespace

void PpData::validate() const {
  if (!obs_rows || !exc_rows || !u_obs || !y_exc) throw std::invalid_argument("PpData: missing field");
  if (u_obs->cols() != 1 || y_exc->cols() != 1) throw std::invalid_argument("PpData: arrays must be columns");
  if (u_obs->rows() != static_cast<Eigen::Index>(obs_rows->size()))
    throw std::invalid_argument("PpData: thresholds misaligned with observed rows");
  if (y_exc->rows() != static_cast<Eigen::Index>(exc_rows->size()))
    throw std::invalid_argument("PpData: responses misaligned with exceedance rows");
  if (!(n_y > 0.0)) throw std::invalid_argument("PpData: n_y must be positive");
}

ad::Var bgev_pp_nll(Tape& tape, Var q, Var s, Var xi, const PpData& data, const evt::BgevConfig& cfg) {
  data.validate();
  cfg.validate();
  if (!(tape.val(xi)(0, 0) > 0.0)) throw std::invalid_argument("bgev_pp_nll: xi must be positive");
  const ShapeVars sv = shape_vars(tape, xi, cfg.alpha, cfg.beta, cfg.p_a, cfg.p_b);

  Var total;
  if (!data.obs_rows->empty()) {
    Var qo = tape.gather_rows(q, data.obs_rows);
    Var so = tape.gather_rows(s, data.obs_rows);
    Var u = tape.constant_ref(data.u_obs);
    const TailVars tv = tail_vars(tape, qo, so, u, sv, false);
    const BlendVars bv = blend_vars(tape, qo, so, u, sv, cfg, false);
    // Mean measure -log G(u) = (1-p) e_g + p t.
    Var mm = tape.add(tape.mul(tape.scale_shift(bv.p, -1.0, 1.0), bv.e_g), tape.mul(bv.p, tv.t));
    total = tape.scale_shift(tape.reduce_sum(mm), 1.0 / data.n_y, 0.0);
  }
  if (!data.exc_rows->empty()) {
    Var qe = tape.gather_rows(q, data.exc_rows);
    Var se = tape.gather_rows(s, data.exc_rows);
    Var y = tape.constant_ref(data.y_exc);
    const TailVars tv = tail_vars(tape, qe, se, y, sv, true);
    const BlendVars bv = blend_vars(tape, qe, se, y, sv, cfg, true);
    Var one_m_p = tape.scale_shift(bv.p, -1.0, 1.0);
    Var d_g = tape.mul(bv.e_g, bv.sigma_g_inv);
    Var d_f = tape.mul(tv.t_pow, tape.mul(tape.mul(sv.delta, sv.inv_xi), tape.reciprocal(se)));
    // log G_F - log G_G = e_g - t.
    Var cross = tape.mul(bv.p_prime, tape.sub(bv.e_g, tv.t));
    Var lambda = tape.add(tape.add(tape.mul(one_m_p, d_g), tape.mul(bv.p, d_f)), cross);
    Var term = tape.neg(tape.reduce_sum(tape.log(tape.clamp_min(lambda, kTiny))));
    total = total.valid() ? tape.add(total, term) : term;
  }
  return total.valid() ? total : tape.constant(0.0);
}

ad::Var gev_pp_nll(Tape& tape, Var q, Var s, Var xi, const PpData& data, double alpha, double beta) {
  data.validate();
  if (!(tape.val(xi)(0, 0) > 0.0)) throw std::invalid_argument("gev_pp_nll: xi must be positive");
  const ShapeVars sv = shape_vars(tape, xi, alpha, beta, 0.05, 0.2);

  const auto check_support = [&](Var arg, const char* what) {
    if (tape.val(arg).minCoeff() <= 0.0)
      throw evt::DomainError(std::string("gev_pp_nll: ") + what + " below the lower endpoint");
  };

  Var total;
  if (!data.obs_rows->empty()) {
    Var qo = tape.gather_rows(q, data.obs_rows);
    Var so = tape.gather_rows(s, data.obs_rows);
    const TailVars tv = tail_vars(tape, qo, so, tape.constant_ref(data.u_obs), sv, false);
    check_support(tv.arg, "threshold");
    total = tape.scale_shift(tape.reduce_sum(tv.t), 1.0 / data.n_y, 0.0);
  }
  if (!data.exc_rows->empty()) {
    Var qe = tape.gather_rows(q, data.exc_rows);
    Var se = tape.gather_rows(s, data.exc_rows);
    const TailVars tv = tail_vars(tape, qe, se, tape.constant_ref(data.y_exc), sv, true);
    check_support(tv.arg, "observation");
    Var d_f = tape.mul(tv.t_pow, tape.mul(tape.mul(sv.delta, sv.inv_xi), tape.reciprocal(se)));
    Var term = tape.neg(tape.reduce_sum(tape.log(tape.clamp_min(d_f, kTiny))));
    total = total.valid() ? tape.add(total, term) : term;
  }
  return total.valid() ? total : tape.constant(0.0);
}

ad::Var tilted_loss(Tape& tape, Var q, std::shared_ptr<const ad::Arr> y, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tilted_loss: tau must lie in (0,1)");
  if (!y) throw std::invalid_argument("tilted_loss: missing responses");
  Var r = tape.sub(tape.constant_ref(std::move(y)), q);
  Var over = tape.relu(r);
  Var under = tape.relu(tape.neg(r));
  return tape.mean(tape.add(tape.scale_shift(over, tau, 0.0), tape.scale_shift(under, 1.0 - tau, 0.0)));
}

ad::Var bernoulli_loss(Tape& tape, Var p, std::shared_ptr<const ad::Arr> y01) {
  if (!y01) throw std::invalid_argument("bernoulli_loss: missing labels");
  for (Eigen::Index j = 0; j < y01->cols(); ++j)
    for (Eigen::Index i = 0; i < y01->rows(); ++i) {
      const double v = (*y01)(i, j);
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("bernoulli_loss: labels must be 0 or 1");
    }
  Var yv = tape.constant_ref(std::move(y01));
  Var pc = tape.clamp_min(tape.clamp_max(p, 1.0 - 1e-12), 1e-12);
  Var ll = tape.add(tape.mul(yv, tape.log(pc)),
                    tape.mul(tape.scale_shift(yv, -1.0, 1.0), tape.log(tape.scale_shift(pc, -1.0, 1.0))));
  return tape.neg(tape.mean(ll));
}

}  // namespace evreg
