// SPDX-License-Identifier: Apache-2.0
//
// Scalar-loop evaluation of the full model loss in an arbitrary floating
// type. Shares no code with the vectorized forward pass; gradcheck uses it in
// extended precision as the finite-difference side.
#pragma once

#include <cmath>
#include <vector>

#include "stlstm/data.hpp"
#include "stlstm/model.hpp"

namespace stlstm::detail {

template <typename Real>
struct RefCell {
  std::size_t n = 0, d = 0;
  // Gate order: input, forget, candidate, output.
  std::vector<Real> Wx[4], Wh[4], b[4];
  std::vector<Real> peep_i, peep_f, peep_o;
};

template <typename Real>
struct RefModel {
  ModelSpec spec;
  std::vector<RefCell<Real>> layer1;
  RefCell<Real> layer2;
  std::vector<Real> w_dense;
  Real b_dense = 0;
  /// Every scalar in checkpoint order, pointing into the members above.
  std::vector<Real*> slots;
};

template <typename Real>
std::vector<Real> widen(std::span<const double> v) {
  return std::vector<Real>(v.begin(), v.end());
}

template <typename Real>
RefCell<Real> widen_cell(const CellParams& p) {
  RefCell<Real> c;
  c.n = p.n();
  c.d = p.d();
  const Matrix* wx[4] = {&p.W_xi, &p.W_xf, &p.W_xc, &p.W_xo};
  const Matrix* wh[4] = {&p.W_hi, &p.W_hf, &p.W_hc, &p.W_ho};
  const Vector* b[4] = {&p.b_i, &p.b_f, &p.b_c, &p.b_o};
  for (int g = 0; g < 4; ++g) {
    c.Wx[g] = widen<Real>(wx[g]->span());
    c.Wh[g] = widen<Real>(wh[g]->span());
    c.b[g] = widen<Real>(b[g]->span());
  }
  c.peep_i = widen<Real>(p.w_ci.span());
  c.peep_f = widen<Real>(p.w_cf.span());
  c.peep_o = widen<Real>(p.w_co.span());
  return c;
}

template <typename Real>
void collect_slots(RefCell<Real>& c, std::vector<Real*>& out) {
  // Same order as visit_tensors: W_x*, W_h*, peepholes, biases.
  for (auto& m : c.Wx)
    for (Real& v : m) out.push_back(&v);
  for (auto& m : c.Wh)
    for (Real& v : m) out.push_back(&v);
  for (auto* vec : {&c.peep_i, &c.peep_f, &c.peep_o})
    for (Real& v : *vec) out.push_back(&v);
  for (auto& vec : c.b)
    for (Real& v : vec) out.push_back(&v);
}

template <typename Real>
RefModel<Real> widen_model(const ModelSpec& spec, const ModelParams& p) {
  RefModel<Real> m;
  m.spec = spec;
  for (const CellParams& cell : p.layer1) m.layer1.push_back(widen_cell<Real>(cell));
  m.layer2 = widen_cell<Real>(p.layer2);
  m.w_dense = widen<Real>(p.w_dense.span());
  m.b_dense = p.b_dense;
  for (auto& cell : m.layer1) collect_slots(cell, m.slots);
  collect_slots(m.layer2, m.slots);
  for (Real& v : m.w_dense) m.slots.push_back(&v);
  m.slots.push_back(&m.b_dense);
  return m;
}

template <typename Real>
Real ref_sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

template <typename Real>
Real ref_act(InnerActivation act, Real x) {
  return act == InnerActivation::tanh ? std::tanh(x) : ref_sigmoid(x);
}

/// One step; h and c are updated in place.
template <typename Real>
void ref_step(const RefCell<Real>& p, InnerActivation act, const std::vector<Real>& x,
              std::vector<Real>& h, std::vector<Real>& c) {
  const std::size_t n = p.n, d = p.d;
  std::vector<Real> pre[4];
  for (int g = 0; g < 4; ++g) {
    pre[g].assign(n, Real(0));
    for (std::size_t r = 0; r < n; ++r) {
      Real s = p.b[g][r];
      for (std::size_t j = 0; j < d; ++j) s += p.Wx[g][r * d + j] * x[j];
      for (std::size_t j = 0; j < n; ++j) s += p.Wh[g][r * n + j] * h[j];
      pre[g][r] = s;
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const Real i = ref_sigmoid(pre[0][r] + p.peep_i[r] * c[r]);
    const Real f = ref_sigmoid(pre[1][r] + p.peep_f[r] * c[r]);
    const Real cn = f * c[r] + i * ref_act(act, pre[2][r]);
    const Real o = ref_sigmoid(pre[3][r] + p.peep_o[r] * cn);
    c[r] = cn;
    h[r] = o * ref_act(act, cn);
  }
}

template <typename Real>
Real ref_predict(const RefModel<Real>& m, const std::vector<Vector>& window) {
  const ModelSpec& s = m.spec;
  const std::size_t cells = m.layer1.size();
  std::vector<std::vector<Real>> h1(cells), c1(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    h1[k].assign(m.layer1[k].n, Real(0));
    c1[k].assign(m.layer1[k].n, Real(0));
  }
  std::vector<Real> h2(m.layer2.n, Real(0)), c2(m.layer2.n, Real(0));
  const std::size_t width = s.kind == ModelKind::stacked ? s.input_dim() : s.vars;
  for (const Vector& xt : window) {
    std::vector<Real> joined;
    for (std::size_t k = 0; k < cells; ++k) {
      std::vector<Real> x(width);
      for (std::size_t j = 0; j < width; ++j) x[j] = xt[k * width + j];
      ref_step(m.layer1[k], s.activation, x, h1[k], c1[k]);
      joined.insert(joined.end(), h1[k].begin(), h1[k].end());
    }
    ref_step(m.layer2, s.activation, joined, h2, c2);
  }
  Real y = m.b_dense;
  for (std::size_t j = 0; j < h2.size(); ++j) y += m.w_dense[j] * h2[j];
  return y;
}

template <typename Real>
Real ref_weight_penalty(const RefCell<Real>& c) {
  Real s = 0;
  for (const auto& m : c.Wx)
    for (Real v : m) s += v * v;
  for (const auto& m : c.Wh)
    for (Real v : m) s += v * v;
  for (const auto* vec : {&c.peep_i, &c.peep_f, &c.peep_o})
    for (Real v : *vec) s += v * v;
  return s;
}

template <typename Real>
Real ref_loss(const RefModel<Real>& m, std::span<const Window* const> batch, Real lambda) {
  Real data = 0;
  for (const Window* w : batch) {
    const Real e = ref_predict(m, w->inputs) - Real(w->target);
    data += e * e;
  }
  data /= Real(batch.size());
  Real pen = 0;
  for (const auto& c : m.layer1) pen += ref_weight_penalty(c);
  pen += ref_weight_penalty(m.layer2);
  for (Real v : m.w_dense) pen += v * v;
  return data + lambda * pen;
}

}  // namespace stlstm::detail
