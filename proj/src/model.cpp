// SPDX-License-Identifier: Apache-2.0
#include "stlstm/model.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "stlstm/errors.hpp"

namespace stlstm {

namespace {

std::size_t parse_count(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw InvalidArgument("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

Vector slice(const Vector& v, std::size_t offset, std::size_t len) {
  return Vector(std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(offset),
                                    v.begin() + static_cast<std::ptrdiff_t>(offset + len)));
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  return kind == ModelKind::stacked ? "stacked" : "st_stacked";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "stacked") return ModelKind::stacked;
  if (name == "st_stacked" || name == "st-stacked" || name == "st") return ModelKind::st_stacked;
  throw InvalidArgument("unknown model kind '" + std::string(name) +
                        "' (expected stacked or st_stacked)");
}

std::size_t ModelSpec::cell_neurons() const noexcept {
  return kind == ModelKind::stacked ? n1 : n1 / locations;
}

std::size_t ModelSpec::layer1_cells() const noexcept {
  return kind == ModelKind::stacked ? 1 : locations;
}

void ModelSpec::validate() const {
  if (locations < 1) throw InvalidArgument("locations must be >= 1");
  if (vars < 1) throw InvalidArgument("vars must be >= 1");
  if (n1 < 1) throw InvalidArgument("n1 must be >= 1");
  if (n2 < 1) throw InvalidArgument("n2 must be >= 1");
  if (seq_len < 1) throw InvalidArgument("seq_len must be >= 1");
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (kind == ModelKind::st_stacked && n1 % locations != 0) {
    throw InvalidArgument("st_stacked needs n1 divisible by locations (n1=" + std::to_string(n1) +
                          ", locations=" + std::to_string(locations) + ")");
  }
}

std::string ModelSpec::to_kv() const {
  std::ostringstream os;
  os << "kind=" << to_string(kind) << " locations=" << locations << " vars=" << vars
     << " n1=" << n1 << " n2=" << n2 << " activation=" << to_string(activation)
     << " seq_len=" << seq_len << " horizon=" << horizon;
  return os.str();
}

bool ModelSpec::set(std::string_view key, std::string_view value) {
  if (key == "kind" || key == "model_kind" || key == "model-kind") {
    kind = parse_model_kind(value);
  } else if (key == "locations") {
    locations = parse_count(key, value);
  } else if (key == "vars" || key == "vars_per_location") {
    vars = parse_count(key, value);
  } else if (key == "n1" || key == "layer1_total_neurons") {
    n1 = parse_count(key, value);
  } else if (key == "n2" || key == "layer2_neurons") {
    n2 = parse_count(key, value);
  } else if (key == "activation" || key == "inner_activation") {
    activation = parse_activation(value);
  } else if (key == "seq_len") {
    seq_len = parse_count(key, value);
  } else if (key == "horizon") {
    horizon = parse_count(key, value);
  } else {
    return false;
  }
  return true;
}

ModelSpec ModelSpec::from_kv(std::string_view line) {
  ModelSpec spec;
  std::istringstream is{std::string(line)};
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw InvalidArgument("expected key=value, got '" + token + "'");
    const std::string_view key = std::string_view(token).substr(0, eq);
    if (!spec.set(key, std::string_view(token).substr(eq + 1))) {
      throw InvalidArgument("unknown model spec key '" + std::string(key) + "'");
    }
  }
  spec.validate();
  return spec;
}

ModelParams zero_params(const ModelSpec& spec) {
  spec.validate();
  ModelParams p;
  const std::size_t cell_in = spec.kind == ModelKind::stacked ? spec.input_dim() : spec.vars;
  p.layer1.assign(spec.layer1_cells(), CellParams(spec.cell_neurons(), cell_in));
  p.layer2 = CellParams(spec.n2, spec.n1);
  p.w_dense = Vector(spec.n2);
  return p;
}

ModelParams init_params(const ModelSpec& spec, std::mt19937_64& rng, bool forget_bias_one) {
  ModelParams p = zero_params(spec);
  for (CellParams& cell : p.layer1) init_cell(cell, rng, forget_bias_one);
  init_cell(p.layer2, rng, forget_bias_one);
  const double r = 1.0 / std::sqrt(static_cast<double>(spec.n2));
  std::uniform_real_distribution<double> dist(-r, r);
  for (double& w : p.w_dense) w = dist(rng);
  p.b_dense = 0.0;
  return p;
}

void check_params(const ModelSpec& spec, const ModelParams& params) {
  const ModelParams expected = zero_params(spec);
  if (params.layer1.size() != expected.layer1.size()) {
    throw DimensionError("model has " + std::to_string(params.layer1.size()) +
                         " layer-1 cells, spec requires " +
                         std::to_string(expected.layer1.size()));
  }
  std::vector<std::pair<std::size_t, std::size_t>> want;
  visit_model_tensors(expected, spec.kind, [&](const std::string&, const ConstTensorRef& t) {
    want.emplace_back(t.rows, t.cols);
  });
  std::size_t i = 0;
  visit_model_tensors(params, spec.kind, [&](const std::string& name, const ConstTensorRef& t) {
    if (t.rows != want[i].first || t.cols != want[i].second ||
        t.values.size() != t.rows * t.cols) {
      throw DimensionError("tensor " + name + " is " + std::to_string(t.rows) + "x" +
                           std::to_string(t.cols) + ", spec requires " +
                           std::to_string(want[i].first) + "x" + std::to_string(want[i].second));
    }
    ++i;
  });
}

std::size_t enumerate_params(const ModelParams& params) {
  std::size_t total = 0;
  visit_model_tensors(params, ModelKind::stacked,
                      [&](const std::string&, const ConstTensorRef& t) { total += t.values.size(); });
  return total;
}

ParamCount param_count(const ModelSpec& spec) {
  spec.validate();
  const std::size_t c = spec.locations;
  const std::size_t m = spec.vars;
  const std::size_t n1 = spec.n1;
  const std::size_t n2 = spec.n2;
  ParamCount out;
  // 4 input matrices, 4 recurrent matrices, 3 peephole vectors, 4 biases.
  if (spec.kind == ModelKind::stacked) {
    out.layer1 = 4 * n1 * (c * m) + 4 * n1 * n1 + 3 * n1 + 4 * n1;
  } else {
    out.layer1 = 4 * n1 * m + 4 * n1 * n1 / c + 3 * n1 + 4 * n1;
  }
  out.layer2 = 4 * n2 * n1 + 4 * n2 * n2 + 3 * n2 + 4 * n2;
  out.head = n2 + 1;
  out.total = out.layer1 + out.layer2 + out.head;
  return out;
}

ForwardResult model_forward(const ModelSpec& spec, const ModelParams& params,
                            std::span<const Vector> window) {
  if (window.size() != spec.seq_len) {
    throw DimensionError("window has " + std::to_string(window.size()) + " steps, model expects " +
                         std::to_string(spec.seq_len));
  }
  for (const Vector& x : window) {
    if (x.size() != spec.input_dim()) {
      throw DimensionError("window step has length " + std::to_string(x.size()) +
                           ", model expects " + std::to_string(spec.input_dim()));
    }
  }
  if (params.layer1.size() != spec.layer1_cells()) {
    throw DimensionError("params have " + std::to_string(params.layer1.size()) +
                         " layer-1 cells, spec requires " + std::to_string(spec.layer1_cells()));
  }

  ForwardResult out;
  ModelTrace& tr = out.trace;
  const std::size_t T = window.size();

  if (spec.kind == ModelKind::stacked) {
    tr.layer1.push_back(sequence_forward(params.layer1[0], window, spec.activation));
    tr.layer2_inputs.reserve(T);
    for (const StepTrace& s : tr.layer1[0].steps) tr.layer2_inputs.push_back(s.h);
  } else {
    const std::size_t m = spec.vars;
    for (std::size_t k = 0; k < spec.locations; ++k) {
      std::vector<Vector> xs;
      xs.reserve(T);
      for (const Vector& x : window) xs.push_back(slice(x, k * m, m));
      tr.layer1.push_back(sequence_forward(params.layer1[k], xs, spec.activation));
    }
    tr.layer2_inputs.reserve(T);
    std::vector<Vector> parts(spec.locations);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < spec.locations; ++k) parts[k] = tr.layer1[k].steps[t].h;
      tr.layer2_inputs.push_back(concat(std::span<const Vector>(parts)));
    }
  }

  tr.layer2 = sequence_forward(params.layer2, tr.layer2_inputs, spec.activation);
  out.prediction = dot(params.w_dense, tr.layer2.final_state.h) + params.b_dense;
  return out;
}

double predict(const ModelSpec& spec, const ModelParams& params, std::span<const Vector> window) {
  return model_forward(spec, params, window).prediction;
}

void model_backward_acc(const ModelSpec& spec, const ModelParams& params, const ModelTrace& trace,
                        double dloss_dy, ModelParams& grads) {
  if (trace.layer1.size() != params.layer1.size() || grads.layer1.size() != params.layer1.size() ||
      trace.layer2.steps.empty()) {
    throw DimensionError("model_backward: trace or gradient buffer does not match params");
  }
  const std::size_t T = trace.layer2.steps.size();
  const Vector& h2_final = trace.layer2.final_state.h;

  for (std::size_t k = 0; k < spec.n2; ++k) grads.w_dense[k] += dloss_dy * h2_final[k];
  grads.b_dense += dloss_dy;

  // Only the final layer-2 hidden state reaches the head.
  std::vector<Vector> dh2(T, Vector(spec.n2));
  dh2.back() = scale(dloss_dy, params.w_dense);
  auto [dx2, d_init2] = cell_backward_acc(params.layer2, trace.layer2.steps, dh2,
                                          Vector(spec.n2), spec.activation, grads.layer2);

  const std::size_t nk = spec.cell_neurons();
  for (std::size_t k = 0; k < params.layer1.size(); ++k) {
    std::vector<Vector> dh1;
    dh1.reserve(T);
    for (std::size_t t = 0; t < T; ++t) dh1.push_back(slice(dx2[t], k * nk, nk));
    cell_backward_acc(params.layer1[k], trace.layer1[k].steps, dh1, Vector(nk), spec.activation,
                      grads.layer1[k]);
  }
}

ModelParams model_backward(const ModelSpec& spec, const ModelParams& params,
                           const ModelTrace& trace, double dloss_dy) {
  ModelParams grads = zero_params(spec);
  model_backward_acc(spec, params, trace, dloss_dy, grads);
  return grads;
}

std::pair<ModelSpec, ModelParams> block_diagonal_embed(const ModelSpec& st_spec,
                                                       const ModelParams& st_params) {
  if (st_spec.kind != ModelKind::st_stacked) {
    throw InvalidArgument("block_diagonal_embed expects an st_stacked model");
  }
  check_params(st_spec, st_params);

  ModelSpec spec = st_spec;
  spec.kind = ModelKind::stacked;
  ModelParams out = zero_params(spec);
  CellParams& big = out.layer1[0];

  const std::size_t nk = st_spec.cell_neurons();
  const std::size_t m = st_spec.vars;
  auto place = [](Matrix& dst, const Matrix& src, std::size_t row0, std::size_t col0) {
    for (std::size_t r = 0; r < src.rows(); ++r)
      for (std::size_t c = 0; c < src.cols(); ++c) dst(row0 + r, col0 + c) = src(r, c);
  };
  auto put = [](Vector& dst, const Vector& src, std::size_t off) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[off + i] = src[i];
  };

  for (std::size_t k = 0; k < st_spec.locations; ++k) {
    const CellParams& cell = st_params.layer1[k];
    const std::size_t r0 = k * nk;
    place(big.W_xi, cell.W_xi, r0, k * m);
    place(big.W_xf, cell.W_xf, r0, k * m);
    place(big.W_xc, cell.W_xc, r0, k * m);
    place(big.W_xo, cell.W_xo, r0, k * m);
    place(big.W_hi, cell.W_hi, r0, r0);
    place(big.W_hf, cell.W_hf, r0, r0);
    place(big.W_hc, cell.W_hc, r0, r0);
    place(big.W_ho, cell.W_ho, r0, r0);
    put(big.w_ci, cell.w_ci, r0);
    put(big.w_cf, cell.w_cf, r0);
    put(big.w_co, cell.w_co, r0);
    put(big.b_i, cell.b_i, r0);
    put(big.b_f, cell.b_f, r0);
    put(big.b_c, cell.b_c, r0);
    put(big.b_o, cell.b_o, r0);
  }
  out.layer2 = st_params.layer2;
  out.w_dense = st_params.w_dense;
  out.b_dense = st_params.b_dense;
  return {spec, std::move(out)};
}

}  // namespace stlstm
