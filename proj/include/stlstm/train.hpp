// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training with squared error plus an L2 penalty on weights,
// the repeat-and-median protocol, and a finite-difference gradient check.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stlstm/data.hpp"
#include "stlstm/metrics.hpp"
#include "stlstm/model.hpp"

namespace stlstm {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double l2_lambda = 1e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::size_t repeats = 5;
  bool forget_bias_init = false;
  /// Hold out the last 10% of training windows and keep the parameters with
  /// the lowest loss on them.
  bool holdout = false;

  void validate() const;
  /// Applies one key=value; returns false if the key is not a config key.
  bool set(std::string_view key, std::string_view value);
  [[nodiscard]] std::string to_kv() const;
};

/// Sum of squares of every weight (matrices, peepholes, dense weights).
/// Biases are excluded.
double l2_penalty(const ModelParams& params);

/// mean((pred - target)^2) + lambda * l2_penalty(params)
double loss(std::span<const double> preds, std::span<const double> targets,
            const ModelParams& params, double lambda);

/// Loss over a batch of windows; when grads is non-null it is overwritten with
/// the full gradient (data term and L2 term).
double batch_loss(const ModelSpec& spec, const ModelParams& params,
                  std::span<const Window* const> batch, double lambda, ModelParams* grads);

struct RunResult {
  std::uint64_t seed = 0;
  ModelParams initial_params;
  ModelParams params;
  std::vector<double> loss_curve;  // training loss per epoch
  std::vector<double> holdout_curve;
  std::optional<double> test_mae;
  std::optional<double> test_mse;
};

/// Throws DivergenceError if the loss becomes non-finite.
RunResult train_once(const ModelSpec& spec, const TrainConfig& config,
                     std::span<const Window> train_windows, std::uint64_t seed);

std::vector<double> predict_windows(const ModelSpec& spec, const ModelParams& params,
                                    std::span<const Window> windows);

struct RepeatedResult {
  std::vector<RunResult> runs;  // by repeat index; repeat r uses seed config.seed + r
  std::optional<double> median_mae;
  std::optional<double> median_mse;
  std::size_t median_run = 0;  // repeat whose test MAE (or final loss) is the median
};

/// Runs config.repeats independent trainings on up to `threads` threads and
/// scores each on test_windows when non-empty.
RepeatedResult train_repeated(const ModelSpec& spec, const TrainConfig& config,
                              std::span<const Window> train_windows,
                              std::span<const Window> test_windows, std::size_t threads = 1);

struct GradcheckOptions {
  std::size_t windows = 3;
  double lambda = 0.01;
  double step = 1e-5;
  double tolerance = 1e-6;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  [[nodiscard]] bool passed(double tolerance) const noexcept { return max_rel_err < tolerance; }
};

/// Compares batch_loss gradients with central differences on every parameter
/// of a randomly initialized model with random windows.
GradcheckReport gradcheck(const ModelSpec& spec, std::uint64_t seed,
                          const GradcheckOptions& options = {});

}  // namespace stlstm
