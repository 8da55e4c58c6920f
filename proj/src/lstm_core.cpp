// SPDX-License-Identifier: Apache-2.0
#include "stlstm/lstm_core.hpp"

#include <cmath>
#include <string>

#include "stlstm/errors.hpp"

namespace stlstm {

namespace {

double activate(InnerActivation act, double x) noexcept {
  return act == InnerActivation::tanh ? std::tanh(x) : sigmoid(x);
}

// Derivative expressed through the activation's output y = g(x).
double activate_grad(InnerActivation act, double y) noexcept {
  return act == InnerActivation::tanh ? 1.0 - y * y : y * (1.0 - y);
}

void check_shapes(const CellParams& p, const CellState& prev, const Vector& x) {
  if (x.size() != p.d()) {
    throw DimensionError("cell_forward: input length " + std::to_string(x.size()) +
                         " but cell expects " + std::to_string(p.d()));
  }
  if (prev.c.size() != p.n() || prev.h.size() != p.n()) {
    throw DimensionError("cell_forward: state (c " + std::to_string(prev.c.size()) + ", h " +
                         std::to_string(prev.h.size()) + ") but cell has " +
                         std::to_string(p.n()) + " neurons");
  }
}

}  // namespace

std::string_view to_string(InnerActivation act) noexcept {
  return act == InnerActivation::tanh ? "tanh" : "sigmoid";
}

InnerActivation parse_activation(std::string_view name) {
  if (name == "tanh") return InnerActivation::tanh;
  if (name == "sigmoid") return InnerActivation::sigmoid;
  throw InvalidArgument("unknown inner activation '" + std::string(name) +
                        "' (expected tanh or sigmoid)");
}

CellParams::CellParams(std::size_t n, std::size_t d)
    : W_xi(n, d), W_xf(n, d), W_xc(n, d), W_xo(n, d),
      W_hi(n, n), W_hf(n, n), W_hc(n, n), W_ho(n, n),
      w_ci(n), w_cf(n), w_co(n),
      b_i(n), b_f(n), b_c(n), b_o(n) {}

std::size_t param_count(const CellParams& p) noexcept {
  std::size_t total = 0;
  visit_tensors(p, [&](const ConstTensorRef& t) { total += t.values.size(); });
  return total;
}

void init_cell(CellParams& p, std::mt19937_64& rng, bool forget_bias_one) {
  visit_tensors(p, [&](const TensorRef& t) {
    if (t.cols == 1) {
      std::fill(t.values.begin(), t.values.end(), 0.0);
      return;
    }
    const double r = 1.0 / std::sqrt(static_cast<double>(t.cols));
    std::uniform_real_distribution<double> dist(-r, r);
    for (double& v : t.values) v = dist(rng);
  });
  if (forget_bias_one) p.b_f.fill(1.0);
}

std::pair<CellState, StepTrace> cell_forward(const CellParams& p, const CellState& prev,
                                             const Vector& x, InnerActivation act) {
  check_shapes(p, prev, x);
  const std::size_t n = p.n();

  StepTrace tr;
  tr.x = x;
  tr.h_prev = prev.h;
  tr.c_prev = prev.c;

  Vector a_i = p.b_i, a_f = p.b_f, a_c = p.b_c, a_o = p.b_o;
  kernels::matvec_acc(p.W_xi, x.span(), a_i.span());
  kernels::matvec_acc(p.W_hi, prev.h.span(), a_i.span());
  kernels::matvec_acc(p.W_xf, x.span(), a_f.span());
  kernels::matvec_acc(p.W_hf, prev.h.span(), a_f.span());
  kernels::matvec_acc(p.W_xc, x.span(), a_c.span());
  kernels::matvec_acc(p.W_hc, prev.h.span(), a_c.span());
  kernels::matvec_acc(p.W_xo, x.span(), a_o.span());
  kernels::matvec_acc(p.W_ho, prev.h.span(), a_o.span());

  tr.i = Vector(n);
  tr.f = Vector(n);
  tr.o = Vector(n);
  tr.cand = Vector(n);
  tr.c = Vector(n);
  tr.g_c = Vector(n);
  tr.h = Vector(n);
  for (std::size_t k = 0; k < n; ++k) {
    tr.i[k] = sigmoid(a_i[k] + p.w_ci[k] * prev.c[k]);
    tr.f[k] = sigmoid(a_f[k] + p.w_cf[k] * prev.c[k]);
    tr.cand[k] = activate(act, a_c[k]);
    tr.c[k] = tr.f[k] * prev.c[k] + tr.i[k] * tr.cand[k];
    tr.o[k] = sigmoid(a_o[k] + p.w_co[k] * tr.c[k]);
    tr.g_c[k] = activate(act, tr.c[k]);
    tr.h[k] = tr.o[k] * tr.g_c[k];
  }
  tr.cand_pre = std::move(a_c);

  CellState next;
  next.c = tr.c;
  next.h = tr.h;
  return {std::move(next), std::move(tr)};
}

SequenceResult sequence_forward(const CellParams& p, std::span<const Vector> xs,
                                InnerActivation act, const CellState& init) {
  if (xs.empty()) throw InvalidArgument("sequence_forward: empty sequence");
  SequenceResult out;
  out.steps.reserve(xs.size());
  CellState state = init;
  for (const Vector& x : xs) {
    auto [next, tr] = cell_forward(p, state, x, act);
    state = std::move(next);
    out.steps.push_back(std::move(tr));
  }
  out.final_state = std::move(state);
  return out;
}

SequenceResult sequence_forward(const CellParams& p, std::span<const Vector> xs,
                                InnerActivation act) {
  return sequence_forward(p, xs, act, CellState(p.n()));
}

std::pair<std::vector<Vector>, CellState> cell_backward_acc(const CellParams& p,
                                                            std::span<const StepTrace> steps,
                                                            std::span<const Vector> dh,
                                                            const Vector& dc_final,
                                                            InnerActivation act,
                                                            CellParams& grads) {
  const std::size_t n = p.n();
  const std::size_t d = p.d();
  if (dh.size() != steps.size()) {
    throw DimensionError("cell_backward: " + std::to_string(dh.size()) +
                         " h-gradients for " + std::to_string(steps.size()) + " steps");
  }
  if (dc_final.size() != n || grads.n() != n || grads.d() != d) {
    throw DimensionError("cell_backward: gradient buffers do not match cell " +
                         std::to_string(n) + "x" + std::to_string(d));
  }

  std::vector<Vector> dx(steps.size(), Vector(d));
  Vector dh_next(n);        // flows into h_{t} from step t+1
  Vector dc_next = dc_final;  // flows into c_{t} from step t+1
  Vector da_i(n), da_f(n), da_c(n), da_o(n);

  for (std::size_t t = steps.size(); t-- > 0;) {
    const StepTrace& s = steps[t];
    if (s.x.size() != d || s.h.size() != n || dh[t].size() != n) {
      throw DimensionError("cell_backward: trace step " + std::to_string(t) +
                           " does not match cell shape");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double dh_k = dh[t][k] + dh_next[k];
      da_o[k] = dh_k * s.g_c[k] * s.o[k] * (1.0 - s.o[k]);
      const double dc = dc_next[k] + dh_k * s.o[k] * activate_grad(act, s.g_c[k]) +
                        da_o[k] * p.w_co[k];
      da_i[k] = dc * s.cand[k] * s.i[k] * (1.0 - s.i[k]);
      da_f[k] = dc * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
      da_c[k] = dc * s.i[k] * activate_grad(act, s.cand[k]);

      grads.w_co[k] += da_o[k] * s.c[k];
      grads.w_ci[k] += da_i[k] * s.c_prev[k];
      grads.w_cf[k] += da_f[k] * s.c_prev[k];
      grads.b_i[k] += da_i[k];
      grads.b_f[k] += da_f[k];
      grads.b_c[k] += da_c[k];
      grads.b_o[k] += da_o[k];

      dc_next[k] = dc * s.f[k] + da_i[k] * p.w_ci[k] + da_f[k] * p.w_cf[k];
    }

    kernels::outer_acc(grads.W_xi, da_i.span(), s.x.span());
    kernels::outer_acc(grads.W_xf, da_f.span(), s.x.span());
    kernels::outer_acc(grads.W_xc, da_c.span(), s.x.span());
    kernels::outer_acc(grads.W_xo, da_o.span(), s.x.span());
    kernels::outer_acc(grads.W_hi, da_i.span(), s.h_prev.span());
    kernels::outer_acc(grads.W_hf, da_f.span(), s.h_prev.span());
    kernels::outer_acc(grads.W_hc, da_c.span(), s.h_prev.span());
    kernels::outer_acc(grads.W_ho, da_o.span(), s.h_prev.span());

    std::span<double> dxt = dx[t].span();
    kernels::matvec_t_acc(p.W_xi, da_i.span(), dxt);
    kernels::matvec_t_acc(p.W_xf, da_f.span(), dxt);
    kernels::matvec_t_acc(p.W_xc, da_c.span(), dxt);
    kernels::matvec_t_acc(p.W_xo, da_o.span(), dxt);

    dh_next.fill(0.0);
    kernels::matvec_t_acc(p.W_hi, da_i.span(), dh_next.span());
    kernels::matvec_t_acc(p.W_hf, da_f.span(), dh_next.span());
    kernels::matvec_t_acc(p.W_hc, da_c.span(), dh_next.span());
    kernels::matvec_t_acc(p.W_ho, da_o.span(), dh_next.span());
  }

  CellState d_init;
  d_init.c = std::move(dc_next);
  d_init.h = std::move(dh_next);
  return {std::move(dx), std::move(d_init)};
}

CellGradients cell_backward(const CellParams& p, std::span<const StepTrace> steps,
                            std::span<const Vector> dh, const Vector& dc_final,
                            InnerActivation act) {
  CellGradients out;
  out.params = CellParams(p.n(), p.d());
  auto [dx, d_init] = cell_backward_acc(p, steps, dh, dc_final, act, out.params);
  out.dx = std::move(dx);
  out.d_init = std::move(d_init);
  return out;
}

}  // namespace stlstm
