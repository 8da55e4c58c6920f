// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "stlstm/checkpoint.hpp"
#include "stlstm/errors.hpp"
#include "stlstm/train.hpp"
#include "support.hpp"

using namespace stlstm;

namespace {

ModelSpec toy(ModelKind kind, InnerActivation act = InnerActivation::tanh) {
  ModelSpec s;
  s.kind = kind;
  s.locations = 2;
  s.vars = 3;
  s.n1 = 8;
  s.n2 = 4;
  s.seq_len = 5;
  s.activation = act;
  return s;
}

std::vector<Window> random_windows(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Window> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].inputs = testing::random_window(spec, rng);
    out[i].target = 0.5 * out[i].inputs.back()[0] + 0.1 * g(rng);
    out[i].window_id = i;
  }
  return out;
}

TrainConfig quick() {
  TrainConfig c;
  c.epochs = 5;
  c.batch_size = 8;
  c.learning_rate = 1e-2;
  c.repeats = 3;
  return c;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("loss examples") {
  const ModelParams none;
  const double same[] = {1.0, 2.0};
  CHECK(loss(same, same, none, 0.0) == 0.0);
  const double p3[] = {3.0}, t1[] = {1.0};
  CHECK(loss(p3, t1, none, 0.0) == 4.0);

  ModelSpec s = toy(ModelKind::stacked);
  ModelParams p = zero_params(s);
  p.layer1[0].W_xi(0, 0) = 2.0;
  CHECK(loss(same, same, p, 1.0) == 4.0);
}

TEST_CASE("the penalty skips biases and the dense bias") {
  const ModelSpec s = toy(ModelKind::st_stacked);
  ModelParams p = zero_params(s);
  p.layer1[1].b_f[0] = 5.0;
  p.layer2.b_o[1] = -3.0;
  p.b_dense = 7.0;
  CHECK(l2_penalty(p) == 0.0);
  p.layer1[1].w_cf[0] = 2.0;
  p.w_dense[0] = 1.0;
  p.layer2.W_hc(1, 1) = -1.0;
  CHECK(l2_penalty(p) == 6.0);
}

TEST_CASE("with a zero data residual the gradient is exactly 2 lambda w") {
  const ModelSpec s = toy(ModelKind::st_stacked);
  std::mt19937_64 rng(4);
  const ModelParams p = testing::random_params(s, rng);
  auto w = random_windows(s, 3, 1);
  for (Window& x : w) x.target = predict(s, p, x.inputs);
  std::vector<const Window*> batch;
  for (const Window& x : w) batch.push_back(&x);
  ModelParams g = zero_params(s);
  const double lambda = 0.3;
  const double l = batch_loss(s, p, batch, lambda, &g);
  CHECK(l == doctest::Approx(lambda * l2_penalty(p)).epsilon(1e-14));
  std::vector<ConstTensorRef> pt, gt;
  visit_model_tensors(p, s.kind, [&](const std::string&, const ConstTensorRef& t) { pt.push_back(t); });
  visit_model_tensors(std::as_const(g), s.kind, [&](const std::string&, const ConstTensorRef& t) { gt.push_back(t); });
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (std::size_t i = 0; i < pt[k].values.size(); ++i) {
      const double want = pt[k].is_weight ? 2.0 * lambda * pt[k].values[i] : 0.0;
      CHECK(gt[k].values[i] == want);
    }
  }
}

TEST_CASE("with lambda = 0 the loss is the mean squared error") {
  const ModelSpec s = toy(ModelKind::stacked);
  std::mt19937_64 rng(2);
  const ModelParams p = testing::random_params(s, rng);
  const auto w = random_windows(s, 4, 2);
  std::vector<const Window*> batch;
  double mse = 0;
  for (const Window& x : w) {
    batch.push_back(&x);
    const double d = predict(s, p, x.inputs) - x.target;
    mse += d * d / 4.0;
  }
  CHECK(batch_loss(s, p, batch, 0.0, nullptr) == doctest::Approx(mse).epsilon(1e-14));
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  const ModelSpec s = toy(ModelKind::stacked);
  for (auto opt : {OptimizerKind::adam, OptimizerKind::sgd}) {
    TrainConfig c = quick();
    c.learning_rate = 0.0;
    c.optimizer = opt;
    const RunResult r = train_once(s, c, random_windows(s, 20, 3), 9);
    CHECK(r.params == r.initial_params);
    CHECK(r.loss_curve.size() == c.epochs);
  }
}

TEST_CASE("same seed, same checkpoint bytes") {
  const ModelSpec s = toy(ModelKind::st_stacked);
  const auto w = random_windows(s, 30, 5);
  const RunResult a = train_once(s, quick(), w, 3);
  const RunResult b = train_once(s, quick(), w, 3);
  const RunResult c = train_once(s, quick(), w, 4);
  CHECK(format_checkpoint({s, a.params, {}}) == format_checkpoint({s, b.params, {}}));
  CHECK(a.loss_curve == b.loss_curve);
  CHECK_FALSE(a.params == c.params);
}

TEST_CASE("training reduces the loss") {
  const ModelSpec s = toy(ModelKind::stacked);
  TrainConfig c = quick();
  c.epochs = 30;
  const RunResult r = train_once(s, c, random_windows(s, 64, 6), 1);
  for (double v : r.loss_curve) CHECK(std::isfinite(v));
  CHECK(r.loss_curve.back() < 0.5 * r.loss_curve.front());
}

TEST_CASE("holdout keeps the best parameters") {
  const ModelSpec s = toy(ModelKind::stacked);
  TrainConfig c = quick();
  c.holdout = true;
  c.epochs = 8;
  const RunResult r = train_once(s, c, random_windows(s, 40, 7), 1);
  REQUIRE(r.holdout_curve.size() == 8);
  const auto w = random_windows(s, 40, 7);
  const std::span<const Window> held = std::span(w).last(4);
  double mse = 0;
  for (const Window& x : held) {
    const double d = predict(s, r.params, x.inputs) - x.target;
    mse += d * d / 4.0;
  }
  CHECK(mse == doctest::Approx(*std::min_element(r.holdout_curve.begin(), r.holdout_curve.end())));
}

TEST_CASE("divergence reports the epoch") {
  const ModelSpec s = toy(ModelKind::stacked);
  TrainConfig c = quick();
  c.optimizer = OptimizerKind::sgd;
  c.learning_rate = 1e300;
  try {
    train_once(s, c, random_windows(s, 20, 8), 1);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("repeats use consecutive seeds and report lower medians") {
  const ModelSpec s = toy(ModelKind::stacked);
  const auto train = random_windows(s, 24, 10);
  const auto test = random_windows(s, 10, 11);
  TrainConfig c = quick();
  c.repeats = 4;
  c.seed = 100;
  const RepeatedResult r = train_repeated(s, c, train, test, 2);
  REQUIRE(r.runs.size() == 4);
  std::vector<double> maes;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.runs[i].seed == 100 + i);
    CHECK(r.runs[i].params == train_once(s, c, train, 100 + i).params);
    maes.push_back(*r.runs[i].test_mae);
  }
  std::sort(maes.begin(), maes.end());
  CHECK(*r.median_mae == maes[1]);
  CHECK(*r.runs[r.median_run].test_mae == maes[1]);

  const RepeatedResult serial = train_repeated(s, c, train, test, 1);
  for (std::size_t i = 0; i < 4; ++i) CHECK(serial.runs[i].params == r.runs[i].params);

  c.repeats = 1;
  const RepeatedResult one = train_repeated(s, c, train, test, 1);
  CHECK(*one.median_mae == *one.runs[0].test_mae);
}

TEST_CASE("config validation and key=value") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.repeats = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.l2_lambda = -0.1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  CHECK(c.set("optimizer", "sgd"));
  CHECK(c.set("holdout", "true"));
  CHECK(c.set("epochs", "7"));
  CHECK(c.optimizer == OptimizerKind::sgd);
  CHECK(c.holdout);
  CHECK(c.epochs == 7);
  CHECK_FALSE(c.set("momentum", "0.9"));
  CHECK_THROWS_AS(c.set("epochs", "seven"), InvalidArgument);
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), InvalidArgument);
}

TEST_CASE("gradcheck passes for every kind and activation") {
  for (auto kind : {ModelKind::stacked, ModelKind::st_stacked}) {
    for (auto act : {InnerActivation::tanh, InnerActivation::sigmoid}) {
      const GradcheckReport r = gradcheck(toy(kind, act), 3);
      CAPTURE(r.worst_param);
      CHECK(r.passed(1e-6));
      CHECK(r.checked == param_count(toy(kind, act)).total);
    }
  }
}

TEST_CASE("gradcheck catches a wrong gradient") {
  // A tolerance below any achievable error must fail and name a parameter.
  GradcheckOptions o;
  o.tolerance = 0.0;
  const GradcheckReport r = gradcheck(toy(ModelKind::stacked), 1, o);
  CHECK_FALSE(r.passed(o.tolerance));
  CHECK_FALSE(r.worst_param.empty());
}

}
