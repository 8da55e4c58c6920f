// SPDX-License-Identifier: Apache-2.0
#include "stlstm/train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <utility>

#include "reference_model.hpp"
#include "stlstm/errors.hpp"

namespace stlstm {

namespace {

std::vector<TensorRef> tensor_list(ModelParams& p) {
  std::vector<TensorRef> out;
  visit_model_tensors(p, ModelKind::stacked,
                      [&](const std::string&, const TensorRef& t) { out.push_back(t); });
  return out;
}

void zero_fill(ModelParams& p) {
  visit_model_tensors(p, ModelKind::stacked, [](const std::string&, const TensorRef& t) {
    std::fill(t.values.begin(), t.values.end(), 0.0);
  });
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InvalidArgument("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw InvalidArgument("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, ModelParams& params) : cfg_(cfg), params_(tensor_list(params)) {
    if (cfg.optimizer == OptimizerKind::adam) {
      for (const auto& t : params_) {
        m_.emplace_back(t.values.size(), 0.0);
        v_.emplace_back(t.values.size(), 0.0);
      }
    }
  }

  void step(ModelParams& grads) {
    const auto g = tensor_list(grads);
    if (cfg_.optimizer == OptimizerKind::sgd) {
      for (std::size_t k = 0; k < params_.size(); ++k)
        for (std::size_t i = 0; i < params_[k].values.size(); ++i)
          params_[k].values[i] -= cfg_.learning_rate * g[k].values[i];
      return;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < params_[k].values.size(); ++i) {
        const double gi = g[k].values[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params_[k].values[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<TensorRef> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

double mean_squared_error(const ModelSpec& spec, const ModelParams& params,
                          std::span<const Window> windows) {
  double s = 0.0;
  for (const Window& w : windows) {
    const double d = predict(spec, params, w.inputs) - w.target;
    s += d * d;
  }
  return s / static_cast<double>(windows.size());
}

}  // namespace

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be a finite value >= 0");
  }
  if (!(l2_lambda >= 0.0)) throw InvalidArgument("l2_lambda must be >= 0");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (repeats < 1) throw InvalidArgument("repeats must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
}

bool TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "l2_lambda") l2_lambda = parse_number<double>(key, value);
  else if (key == "optimizer") optimizer = parse_optimizer(value);
  else if (key == "beta1") beta1 = parse_number<double>(key, value);
  else if (key == "beta2") beta2 = parse_number<double>(key, value);
  else if (key == "epsilon") epsilon = parse_number<double>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "repeats") repeats = parse_number<std::size_t>(key, value);
  else if (key == "forget_bias_init") forget_bias_init = parse_bool(key, value);
  else if (key == "holdout") holdout = parse_bool(key, value);
  else return false;
  return true;
}

std::string TrainConfig::to_kv() const {
  std::ostringstream os;
  os << "learning_rate=" << learning_rate << " epochs=" << epochs << " batch_size=" << batch_size
     << " l2_lambda=" << l2_lambda << " optimizer=" << to_string(optimizer);
  if (optimizer == OptimizerKind::adam) {
    os << " beta1=" << beta1 << " beta2=" << beta2 << " epsilon=" << epsilon;
  }
  os << " seed=" << seed << " repeats=" << repeats
     << " forget_bias_init=" << (forget_bias_init ? "true" : "false")
     << " holdout=" << (holdout ? "true" : "false");
  return os.str();
}

double l2_penalty(const ModelParams& params) {
  double s = 0.0;
  visit_model_tensors(params, ModelKind::stacked, [&](const std::string&, const ConstTensorRef& t) {
    if (!t.is_weight) return;
    for (double w : t.values) s += w * w;
  });
  return s;
}

double loss(std::span<const double> preds, std::span<const double> targets,
            const ModelParams& params, double lambda) {
  if (preds.size() != targets.size()) {
    throw InvalidArgument("loss: " + std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(targets.size()) + " targets");
  }
  double data = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    data += d * d;
  }
  if (!preds.empty()) data /= static_cast<double>(preds.size());
  return data + (lambda != 0.0 ? lambda * l2_penalty(params) : 0.0);
}

double batch_loss(const ModelSpec& spec, const ModelParams& params,
                  std::span<const Window* const> batch, double lambda, ModelParams* grads) {
  if (batch.empty()) throw InvalidArgument("batch_loss: empty batch");
  if (grads) zero_fill(*grads);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double data = 0.0;
  for (const Window* w : batch) {
    ForwardResult fw = model_forward(spec, params, w->inputs);
    const double err = fw.prediction - w->target;
    data += err * err;
    if (grads) model_backward_acc(spec, params, fw.trace, 2.0 * err * inv_b, *grads);
  }
  data *= inv_b;
  if (lambda == 0.0) return data;

  if (grads) {
    // Both walks visit tensors in the same order.
    std::vector<std::span<const double>> weights;
    visit_model_tensors(params, ModelKind::stacked,
                        [&](const std::string&, const ConstTensorRef& t) {
                          weights.push_back(t.is_weight ? t.values : std::span<const double>{});
                        });
    std::size_t k = 0;
    visit_model_tensors(*grads, ModelKind::stacked, [&](const std::string&, const TensorRef& t) {
      const auto w = weights[k++];
      for (std::size_t i = 0; i < w.size(); ++i) t.values[i] += 2.0 * lambda * w[i];
    });
  }
  return data + lambda * l2_penalty(params);
}

RunResult train_once(const ModelSpec& spec, const TrainConfig& config,
                     std::span<const Window> train_windows, std::uint64_t seed) {
  spec.validate();
  config.validate();
  if (train_windows.empty()) throw InvalidArgument("train_once: no training windows");

  std::span<const Window> fit = train_windows;
  std::span<const Window> held;
  if (config.holdout) {
    const std::size_t n_held = std::max<std::size_t>(1, train_windows.size() / 10);
    if (n_held >= train_windows.size()) {
      throw InvalidArgument("holdout needs at least 2 training windows");
    }
    fit = train_windows.first(train_windows.size() - n_held);
    held = train_windows.last(n_held);
  }

  std::mt19937_64 rng(seed);
  RunResult run;
  run.seed = seed;
  run.params = init_params(spec, rng, config.forget_bias_init);
  run.initial_params = run.params;

  ModelParams grads = zero_params(spec);
  ModelParams best;
  double best_held = std::numeric_limits<double>::infinity();
  Optimizer opt(config, run.params);

  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Window*> batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&fit[order[i]]);
      const double l = batch_loss(spec, run.params, batch, config.l2_lambda, &grads);
      if (!std::isfinite(l)) {
        throw DivergenceError("training loss became non-finite in epoch " + std::to_string(epoch),
                              static_cast<int>(epoch));
      }
      epoch_loss += l * static_cast<double>(batch.size());
      opt.step(grads);
    }
    epoch_loss /= static_cast<double>(order.size());
    run.loss_curve.push_back(epoch_loss);

    if (!held.empty()) {
      const double h = mean_squared_error(spec, run.params, held);
      if (!std::isfinite(h)) {
        throw DivergenceError("holdout loss became non-finite in epoch " + std::to_string(epoch),
                              static_cast<int>(epoch));
      }
      run.holdout_curve.push_back(h);
      if (h < best_held) {
        best_held = h;
        best = run.params;
      }
    }
  }
  if (!held.empty()) run.params = std::move(best);
  return run;
}

std::vector<double> predict_windows(const ModelSpec& spec, const ModelParams& params,
                                    std::span<const Window> windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const Window& w : windows) out.push_back(predict(spec, params, w.inputs));
  return out;
}

RepeatedResult train_repeated(const ModelSpec& spec, const TrainConfig& config,
                              std::span<const Window> train_windows,
                              std::span<const Window> test_windows, std::size_t threads) {
  config.validate();
  const std::size_t n = config.repeats;
  RepeatedResult out;
  out.runs.resize(n);
  std::vector<std::exception_ptr> errors(n);

  std::vector<double> truths;
  for (const Window& w : test_windows) truths.push_back(w.target);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < n; r = next++) {
      try {
        RunResult run = train_once(spec, config, train_windows, config.seed + r);
        if (!test_windows.empty()) {
          const auto preds = predict_windows(spec, run.params, test_windows);
          run.test_mae = mae(preds, truths);
          run.test_mse = mse(preds, truths);
        }
        out.runs[r] = std::move(run);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> score;
  if (!test_windows.empty()) {
    std::vector<double> maes, mses;
    for (const RunResult& r : out.runs) {
      maes.push_back(*r.test_mae);
      mses.push_back(*r.test_mse);
    }
    out.median_mae = median_lower(maes);
    out.median_mse = median_lower(mses);
    score = maes;
  } else {
    for (const RunResult& r : out.runs) score.push_back(r.loss_curve.back());
  }
  const double med = median_lower(score);
  out.median_run = static_cast<std::size_t>(std::find(score.begin(), score.end(), med) - score.begin());
  return out;
}

GradcheckReport gradcheck(const ModelSpec& spec, std::uint64_t seed,
                          const GradcheckOptions& options) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ModelParams params = zero_params(spec);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  visit_model_tensors(params, spec.kind, [&](const std::string&, const TensorRef& t) {
    for (double& v : t.values) v = uni(rng);
  });

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Window> windows(options.windows);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    windows[w].window_id = w;
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      Vector x(spec.input_dim());
      for (double& v : x) v = gauss(rng);
      windows[w].inputs.push_back(std::move(x));
    }
    windows[w].target = gauss(rng);
  }
  std::vector<const Window*> batch;
  for (const Window& w : windows) batch.push_back(&w);

  ModelParams analytic = zero_params(spec);
  batch_loss(spec, params, batch, options.lambda, &analytic);

  std::vector<std::pair<std::string, std::span<const double>>> grads;
  visit_model_tensors(std::as_const(analytic), spec.kind, [&](const std::string& name, const ConstTensorRef& t) {
    grads.emplace_back(name, t.values);
  });

  // The numeric side runs on an independent scalar evaluator in extended
  // precision so cancellation in (up - down) stays far below the tolerance.
  using Wide = long double;
  detail::RefModel<Wide> ref = detail::widen_model<Wide>(spec, params);
  const Wide lambda = options.lambda;
  const Wide h = options.step;

  std::vector<std::pair<std::string, double>> flat;
  for (const auto& [name, g] : grads)
    for (std::size_t i = 0; i < g.size(); ++i) flat.emplace_back(name + "[" + std::to_string(i) + "]", g[i]);
  if (flat.size() != ref.slots.size()) {
    throw DimensionError("gradcheck: reference model has " + std::to_string(ref.slots.size()) +
                         " parameters, analytic gradient has " + std::to_string(flat.size()));
  }

  GradcheckReport report;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    Wide& slot = *ref.slots[i];
    const Wide saved = slot;
    slot = saved + h;
    const Wide up = detail::ref_loss(ref, batch, lambda);
    slot = saved - h;
    const Wide down = detail::ref_loss(ref, batch, lambda);
    slot = saved;
    const double numeric = static_cast<double>((up - down) / (2 * h));
    const double a = flat[i].second;
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    ++report.checked;
    if (report.worst_param.empty() || rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = flat[i].first;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace stlstm
