// SPDX-License-Identifier: Apache-2.0
//
// Two-layer LSTM regressors with a dense head reading the last layer-2
// hidden state.
//
//  stacked     one layer-1 cell over the concatenated input of all locations
//  st_stacked  one independent layer-1 cell per location (n1/c neurons each);
//              their hidden states are concatenated in location order and
//              fed to layer 2
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stlstm/lstm_core.hpp"
#include "stlstm/numerics.hpp"

namespace stlstm {

enum class ModelKind { stacked, st_stacked };

std::string_view to_string(ModelKind kind) noexcept;
/// Accepts "stacked", "st_stacked", "st-stacked" or "st".
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::stacked;
  std::size_t locations = 1;  // c
  std::size_t vars = 1;       // m, variables per location
  std::size_t n1 = 20;        // total layer-1 neurons
  std::size_t n2 = 32;
  InnerActivation activation = InnerActivation::tanh;
  std::size_t seq_len = 10;  // T
  std::size_t horizon = 1;   // q, days ahead

  [[nodiscard]] std::size_t input_dim() const noexcept { return locations * vars; }
  /// Neurons of each layer-1 cell: n1 for stacked, n1/c for st_stacked.
  [[nodiscard]] std::size_t cell_neurons() const noexcept;
  [[nodiscard]] std::size_t layer1_cells() const noexcept;

  /// Throws InvalidArgument describing the first violated invariant.
  void validate() const;

  /// `kind=... locations=... vars=... n1=... n2=... activation=... seq_len=... horizon=...`
  [[nodiscard]] std::string to_kv() const;
  static ModelSpec from_kv(std::string_view line);
  /// Applies one key=value; returns false if the key is not a spec key.
  bool set(std::string_view key, std::string_view value);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ModelParams {
  std::vector<CellParams> layer1;  // 1 cell (stacked) or c cells (st_stacked)
  CellParams layer2;               // n2 x n1
  Vector w_dense;                  // n2
  double b_dense = 0.0;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// All-zero parameters with the shapes required by spec.
ModelParams zero_params(const ModelSpec& spec);
ModelParams init_params(const ModelSpec& spec, std::mt19937_64& rng, bool forget_bias_one = false);
/// Throws DimensionError if params do not have the shapes required by spec.
void check_params(const ModelSpec& spec, const ModelParams& params);

/// Calls fn(name, BasicTensorRef) for every tensor in checkpoint order.
/// Names: layer1.<t> (stacked), layer1.loc<k>.<t> (st_stacked), layer2.<t>,
/// dense.w, dense.b.
template <typename Params, typename Fn>
  requires std::is_same_v<std::remove_const_t<Params>, ModelParams>
void visit_model_tensors(Params& params, ModelKind kind, Fn&& fn) {
  using T = std::conditional_t<std::is_const_v<Params>, const double, double>;
  for (std::size_t k = 0; k < params.layer1.size(); ++k) {
    const std::string prefix =
        kind == ModelKind::stacked ? "layer1." : "layer1.loc" + std::to_string(k) + ".";
    visit_tensors(params.layer1[k], [&](const BasicTensorRef<T>& t) {
      fn(prefix + std::string(t.name), t);
    });
  }
  visit_tensors(params.layer2, [&](const BasicTensorRef<T>& t) {
    fn("layer2." + std::string(t.name), t);
  });
  fn(std::string("dense.w"),
     BasicTensorRef<T>{"w", params.w_dense.span(), params.w_dense.size(), 1, true});
  fn(std::string("dense.b"), BasicTensorRef<T>{"b", std::span<T>(&params.b_dense, 1), 1, 1, false});
}

/// Number of scalars actually held by params.
std::size_t enumerate_params(const ModelParams& params);

struct ParamCount {
  std::size_t layer1 = 0;
  std::size_t layer2 = 0;
  std::size_t head = 0;
  std::size_t total = 0;
  friend bool operator==(const ParamCount&, const ParamCount&) = default;
};

/// Closed-form parameter count.
ParamCount param_count(const ModelSpec& spec);

struct ModelTrace {
  std::vector<SequenceResult> layer1;  // one per layer-1 cell
  std::vector<Vector> layer2_inputs;   // concatenated layer-1 hidden states per step
  SequenceResult layer2;
};

struct ForwardResult {
  double prediction = 0.0;
  ModelTrace trace;
};

/// Sequence-to-one forward pass over a window of seq_len input vectors, each
/// of length locations * vars (location-major).
ForwardResult model_forward(const ModelSpec& spec, const ModelParams& params,
                            std::span<const Vector> window);
double predict(const ModelSpec& spec, const ModelParams& params, std::span<const Vector> window);

/// Adds d(loss)/d(params) into grads given dloss_dy = d(loss)/d(prediction).
void model_backward_acc(const ModelSpec& spec, const ModelParams& params, const ModelTrace& trace,
                        double dloss_dy, ModelParams& grads);
ModelParams model_backward(const ModelSpec& spec, const ModelParams& params,
                           const ModelTrace& trace, double dloss_dy);

/// Rewrites a spatio-temporal model as an equivalent stacked model whose
/// layer-1 matrices are block diagonal (block k = location k's cell).
/// Returns the stacked spec alongside the params.
std::pair<ModelSpec, ModelParams> block_diagonal_embed(const ModelSpec& st_spec,
                                                       const ModelParams& st_params);

}  // namespace stlstm
