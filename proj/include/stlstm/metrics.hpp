// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stlstm/lstm_core.hpp"
#include "stlstm/model.hpp"

namespace stlstm {

/// Mean absolute error. Throws InvalidArgument on empty or mismatched input.
double mae(std::span<const double> preds, std::span<const double> truths);
/// Mean squared error. Same preconditions as mae.
double mse(std::span<const double> preds, std::span<const double> truths);

/// Lower-middle element for even counts. Throws InvalidArgument when empty.
double median_lower(std::vector<double> values);

struct EvalReport {
  std::string testset;
  ModelKind kind = ModelKind::stacked;
  std::size_t horizon = 1;
  std::string target;
  InnerActivation activation = InnerActivation::tanh;
  std::vector<std::size_t> window_ids;
  std::vector<double> predictions;
  std::vector<double> truths;
  double mae = 0.0;
  double mse = 0.0;

  [[nodiscard]] std::size_t n_windows() const noexcept { return predictions.size(); }
};

/// Fills mae/mse from predictions and truths.
EvalReport make_report(std::string testset, const ModelSpec& spec, std::string target,
                       std::vector<std::size_t> window_ids, std::vector<double> predictions,
                       std::vector<double> truths);

std::string format_report(const EvalReport& report);
EvalReport parse_report(std::string_view text);
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

/// One row of the comparison table: a (testset, steps ahead, target,
/// activation, metric) cell with the value of each model kind when present.
struct ComparisonRow {
  std::string testset;
  std::size_t steps_ahead = 0;
  std::string target;
  InnerActivation activation = InnerActivation::tanh;
  std::string metric;  // "MAE" or "MSE"
  std::optional<double> stacked;
  std::optional<double> st_stacked;
  /// "stacked", "st_stacked", "tie" (equal values; both are marked) or "-"
  /// when only one model kind reported the cell.
  std::string winner;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  /// Fixed-width text; the better value of each row carries a trailing '*'.
  [[nodiscard]] std::string to_text() const;
  /// Columns testset,steps_ahead,target,activation,metric,stacked,st_stacked,winner.
  [[nodiscard]] std::string to_csv() const;
};

/// Throws DuplicateCellError if two reports share (testset, horizon, target,
/// activation, kind).
ComparisonTable comparison_report(std::span<const EvalReport> reports);

}  // namespace stlstm
