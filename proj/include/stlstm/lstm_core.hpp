// SPDX-License-Identifier: Apache-2.0
//
// Peephole LSTM cell with diagonal peepholes. One step computes
//
//   i   = sigmoid(W_xi x + W_hi h_prev + w_ci . c_prev + b_i)
//   f   = sigmoid(W_xf x + W_hf h_prev + w_cf . c_prev + b_f)
//   c   = f . c_prev + i . g(W_xc x + W_hc h_prev + b_c)
//   o   = sigmoid(W_xo x + W_ho h_prev + w_co . c + b_o)
//   h   = o . g(c)
//
// where g is the inner activation (tanh or sigmoid) and the output gate
// looks at the current cell state.
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "stlstm/numerics.hpp"

namespace stlstm {

enum class InnerActivation { tanh, sigmoid };

std::string_view to_string(InnerActivation act) noexcept;
/// Accepts "tanh" or "sigmoid"; throws InvalidArgument otherwise.
InnerActivation parse_activation(std::string_view name);

/// Weights and biases of one cell: n neurons, d inputs.
struct CellParams {
  CellParams() = default;
  CellParams(std::size_t n, std::size_t d);

  [[nodiscard]] std::size_t n() const noexcept { return b_i.size(); }
  [[nodiscard]] std::size_t d() const noexcept { return W_xi.cols(); }

  Matrix W_xi, W_xf, W_xc, W_xo;  // n x d
  Matrix W_hi, W_hf, W_hc, W_ho;  // n x n
  Vector w_ci, w_cf, w_co;        // diagonal peepholes
  Vector b_i, b_f, b_c, b_o;

  friend bool operator==(const CellParams&, const CellParams&) = default;
};

/// A named view over one tensor of a parameter set. Vectors are n x 1.
template <typename T>
struct BasicTensorRef {
  std::string_view name;
  std::span<T> values;
  std::size_t rows;
  std::size_t cols;
  bool is_weight;  // biases are false; they are excluded from L2
};
using TensorRef = BasicTensorRef<double>;
using ConstTensorRef = BasicTensorRef<const double>;

/// Calls fn(BasicTensorRef) for every tensor in a fixed canonical order.
template <typename Cell, typename Fn>
  requires std::is_same_v<std::remove_const_t<Cell>, CellParams>
void visit_tensors(Cell& p, Fn&& fn) {
  using T = std::conditional_t<std::is_const_v<Cell>, const double, double>;
  auto mat = [&](std::string_view name, auto& m) {
    fn(BasicTensorRef<T>{name, m.span(), m.rows(), m.cols(), true});
  };
  auto vec = [&](std::string_view name, auto& v, bool weight) {
    fn(BasicTensorRef<T>{name, v.span(), v.size(), 1, weight});
  };
  mat("W_xi", p.W_xi);
  mat("W_xf", p.W_xf);
  mat("W_xc", p.W_xc);
  mat("W_xo", p.W_xo);
  mat("W_hi", p.W_hi);
  mat("W_hf", p.W_hf);
  mat("W_hc", p.W_hc);
  mat("W_ho", p.W_ho);
  vec("w_ci", p.w_ci, true);
  vec("w_cf", p.w_cf, true);
  vec("w_co", p.w_co, true);
  vec("b_i", p.b_i, false);
  vec("b_f", p.b_f, false);
  vec("b_c", p.b_c, false);
  vec("b_o", p.b_o, false);
}

std::size_t param_count(const CellParams& p) noexcept;

/// Uniform(-r, r) with r = 1/sqrt(fan_in) for every matrix; peepholes and
/// biases zero, except b_f = 1 when forget_bias_one is set.
void init_cell(CellParams& p, std::mt19937_64& rng, bool forget_bias_one = false);

struct CellState {
  CellState() = default;
  explicit CellState(std::size_t n) : c(n), h(n) {}
  Vector c;
  Vector h;
  friend bool operator==(const CellState&, const CellState&) = default;
};

/// Everything the backward pass needs from one forward step.
struct StepTrace {
  Vector x;
  Vector h_prev, c_prev;
  Vector i, f, o;
  Vector cand_pre;  // W_xc x + W_hc h_prev + b_c
  Vector cand;      // g(cand_pre)
  Vector c;
  Vector g_c;  // g(c)
  Vector h;
};

std::pair<CellState, StepTrace> cell_forward(const CellParams& p, const CellState& prev,
                                             const Vector& x, InnerActivation act);

struct SequenceResult {
  std::vector<StepTrace> steps;
  CellState final_state;
};

/// Runs cell_forward over the sequence starting from init. Throws
/// InvalidArgument on an empty sequence.
SequenceResult sequence_forward(const CellParams& p, std::span<const Vector> xs,
                                InnerActivation act, const CellState& init);
SequenceResult sequence_forward(const CellParams& p, std::span<const Vector> xs,
                                InnerActivation act);

struct CellGradients {
  CellParams params;
  std::vector<Vector> dx;  // one per step
  CellState d_init;        // gradient w.r.t. the initial (c, h)
};

/// Reverse-mode pass over a traced sequence. dh holds the upstream gradient on
/// each step's h (same length as steps); dc_final is the gradient on the final
/// cell state. Parameter gradients are added into grads.
/// Returns the input and initial-state gradients.
std::pair<std::vector<Vector>, CellState> cell_backward_acc(const CellParams& p,
                                                            std::span<const StepTrace> steps,
                                                            std::span<const Vector> dh,
                                                            const Vector& dc_final,
                                                            InnerActivation act,
                                                            CellParams& grads);

CellGradients cell_backward(const CellParams& p, std::span<const StepTrace> steps,
                            std::span<const Vector> dh, const Vector& dc_final,
                            InnerActivation act);

}  // namespace stlstm
