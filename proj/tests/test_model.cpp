// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "stlstm/errors.hpp"
#include "stlstm/model.hpp"
#include "support.hpp"

using namespace stlstm;
using testing::random_params;
using testing::random_window;

namespace {

ModelSpec small_spec(ModelKind kind, InnerActivation act = InnerActivation::tanh) {
  ModelSpec s;
  s.kind = kind;
  s.locations = 2;
  s.vars = 3;
  s.n1 = 4;
  s.n2 = 3;
  s.activation = act;
  s.seq_len = 4;
  return s;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("predictions match the frozen NumPy values") {
  // tests/oracle/golden.py: canonical-order p[j] = 0.3 sin(1.7 j + 0.5),
  // x[t][j] = cos(0.9 t + 0.4 j); c=2, m=3, n1=4, n2=3, T=4.
  struct Case {
    ModelKind kind;
    InnerActivation act;
    double y;
  };
  const Case cases[] = {
      {ModelKind::stacked, InnerActivation::tanh, 0.19992779254722512},
      {ModelKind::stacked, InnerActivation::sigmoid, 0.21632356187801002},
      {ModelKind::st_stacked, InnerActivation::tanh, -0.10700352390739173},
      {ModelKind::st_stacked, InnerActivation::sigmoid, -0.02850145433834577},
  };
  for (const Case& c : cases) {
    const ModelSpec spec = small_spec(c.kind, c.act);
    ModelParams p = zero_params(spec);
    std::size_t j = 0;
    visit_model_tensors(p, spec.kind, [&](const std::string&, const TensorRef& t) {
      for (double& v : t.values) v = 0.3 * std::sin(1.7 * static_cast<double>(j++) + 0.5);
    });
    std::vector<Vector> window;
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      Vector x(spec.input_dim());
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::cos(0.9 * static_cast<double>(t) + 0.4 * static_cast<double>(i));
      window.push_back(x);
    }
    CAPTURE(to_string(c.kind));
    CAPTURE(to_string(c.act));
    CHECK(std::abs(predict(spec, p, window) - c.y) < 1e-12);
  }
}

TEST_CASE("zero parameters predict the dense bias") {
  const ModelSpec spec = small_spec(ModelKind::st_stacked);
  ModelParams p = zero_params(spec);
  p.b_dense = 1.25;
  std::mt19937_64 rng(1);
  CHECK(predict(spec, p, random_window(spec, rng)) == 1.25);
}

TEST_CASE("closed-form parameter counts") {
  ModelSpec s;
  s.locations = 5;
  s.vars = 18;
  s.n1 = 160;
  s.n2 = 64;
  s.kind = ModelKind::stacked;
  CHECK(param_count(s).layer1 == 161120);
  s.kind = ModelKind::st_stacked;
  CHECK(param_count(s).layer1 == 33120);
  CHECK(param_count(s).layer2 == 4 * 64 * 160 + 4 * 64 * 64 + 7 * 64);
  CHECK(param_count(s).head == 65);
}

TEST_CASE("closed form equals enumeration and st is smaller for c >= 2") {
  for (std::size_t c : {1u, 2u, 3u, 5u}) {
    for (std::size_t m : {1u, 4u}) {
      for (std::size_t per : {1u, 3u}) {
        ModelSpec s;
        s.locations = c;
        s.vars = m;
        s.n1 = per * c;
        s.n2 = 2 + c;
        s.kind = ModelKind::stacked;
        const ParamCount a = param_count(s);
        CHECK(a.total == enumerate_params(zero_params(s)));
        CHECK(a.total == a.layer1 + a.layer2 + a.head);
        s.kind = ModelKind::st_stacked;
        const ParamCount b = param_count(s);
        CHECK(b.total == enumerate_params(zero_params(s)));
        if (c >= 2) CHECK(b.total < a.total);
        if (c == 1) CHECK(b.total == a.total);
      }
    }
  }
}

TEST_CASE("spec validation") {
  ModelSpec s = small_spec(ModelKind::st_stacked);
  s.n1 = 5;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.kind = ModelKind::stacked;
  CHECK_NOTHROW(s.validate());
  s.seq_len = 0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.seq_len = 3;
  s.horizon = 0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("spec key=value round trip and aliases") {
  ModelSpec s = small_spec(ModelKind::st_stacked, InnerActivation::sigmoid);
  s.horizon = 3;
  CHECK(ModelSpec::from_kv(s.to_kv()) == s);
  CHECK(parse_model_kind("st") == ModelKind::st_stacked);
  CHECK(parse_model_kind("st-stacked") == ModelKind::st_stacked);
  CHECK(parse_model_kind("stacked") == ModelKind::stacked);
  CHECK_THROWS_AS(parse_model_kind("gru"), InvalidArgument);
  ModelSpec t;
  CHECK(t.set("layer2_neurons", "9"));
  CHECK(t.n2 == 9);
  CHECK_FALSE(t.set("bogus", "1"));
}

TEST_CASE("tensor names") {
  const ModelSpec spec = small_spec(ModelKind::st_stacked);
  const ModelParams p = zero_params(spec);
  std::vector<std::string> names;
  visit_model_tensors(p, spec.kind, [&](const std::string& n, const ConstTensorRef&) { names.push_back(n); });
  CHECK(names.front() == "layer1.loc0.W_xi");
  CHECK(names[15] == "layer1.loc1.W_xi");
  CHECK(names.back() == "dense.b");
  CHECK(names.size() == 15 * 3 + 2);
}

TEST_CASE("check_params rejects wrong shapes") {
  const ModelSpec spec = small_spec(ModelKind::stacked);
  ModelParams p = zero_params(spec);
  CHECK_NOTHROW(check_params(spec, p));
  p.w_dense = Vector(7);
  CHECK_THROWS_AS(check_params(spec, p), DimensionError);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(predict(spec, zero_params(spec), std::vector<Vector>(4, Vector(5))), DimensionError);
}

TEST_CASE("block-diagonal embedding reproduces st predictions") {
  std::mt19937_64 rng(42);
  ModelSpec st;
  st.kind = ModelKind::st_stacked;
  st.locations = 3;
  st.vars = 2;
  st.n1 = 6;
  st.n2 = 4;
  st.seq_len = 6;
  for (int trial = 0; trial < 10; ++trial) {
    st.activation = trial % 2 ? InnerActivation::sigmoid : InnerActivation::tanh;
    const ModelParams p = random_params(st, rng);
    const auto [spec, q] = block_diagonal_embed(st, p);
    CHECK(spec.kind == ModelKind::stacked);
    CHECK(param_count(spec).total > param_count(st).total);
    const auto w = random_window(st, rng);
    CHECK(std::abs(predict(spec, q, w) - predict(st, p, w)) < 1e-12);
    // Off-diagonal blocks are zero.
    CHECK(q.layer1[0].W_xi(0, 2) == 0.0);
    CHECK(q.layer1[0].W_hf(0, 2) == 0.0);
  }
}

TEST_CASE("st layer-1 cells only see their own location") {
  std::mt19937_64 rng(8);
  const ModelSpec spec = small_spec(ModelKind::st_stacked);
  const ModelParams p = random_params(spec, rng);
  auto w = random_window(spec, rng);
  const ForwardResult a = model_forward(spec, p, w);
  for (auto& x : w) x[4] += 0.5;  // location 1, variable 1
  const ForwardResult b = model_forward(spec, p, w);
  CHECK(a.trace.layer1[0].final_state == b.trace.layer1[0].final_state);
  CHECK_FALSE(a.trace.layer1[1].final_state == b.trace.layer1[1].final_state);
}

TEST_CASE("model_backward matches central differences on the prediction") {
  std::mt19937_64 rng(17);
  for (auto kind : {ModelKind::stacked, ModelKind::st_stacked}) {
    const ModelSpec spec = small_spec(kind, InnerActivation::sigmoid);
    ModelParams p = random_params(spec, rng);
    const auto w = random_window(spec, rng);
    const ModelParams g = model_backward(spec, p, model_forward(spec, p, w).trace, 1.0);
    std::vector<std::span<double>> ps;
    std::vector<std::span<const double>> gs;
    visit_model_tensors(p, kind, [&](const std::string&, const TensorRef& t) { ps.push_back(t.values); });
    visit_model_tensors(g, kind, [&](const std::string&, const ConstTensorRef& t) { gs.push_back(t.values); });
    const double h = 1e-6;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      for (std::size_t i = 0; i < ps[k].size(); ++i) {
        const double saved = ps[k][i];
        ps[k][i] = saved + h;
        const double up = predict(spec, p, w);
        ps[k][i] = saved - h;
        const double down = predict(spec, p, w);
        ps[k][i] = saved;
        const double num = (up - down) / (2 * h);
        CHECK(std::abs(gs[k][i] - num) <= 1e-8 + 1e-6 * std::abs(num));
      }
    }
  }
}

}
