// SPDX-License-Identifier: Apache-2.0
//
// Multi-location daily series: CSV ingestion, z-scoring with training-range
// statistics, and (input window, target) sample construction.
#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stlstm/numerics.hpp"

namespace stlstm {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD; throws InvalidArgument on malformed or impossible dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

struct Manifest {
  struct Location {
    std::string name;
    std::filesystem::path csv;
  };
  std::vector<Location> locations;  // canonical order
  std::string target_location;
  std::string target_variable;
  std::optional<Date> test_start;
  std::optional<Date> test_end;

  /// Index of target_location in locations; throws DataError if absent.
  [[nodiscard]] std::size_t target_location_index() const;
};

/// Reads the manifest text format. Relative CSV paths are resolved against the
/// manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
std::string format_manifest(const Manifest& manifest);

enum class MissingPolicy { error, ffill };
MissingPolicy parse_missing_policy(std::string_view name);

struct Dataset {
  std::vector<Date> dates;
  std::vector<std::string> locations;
  std::vector<std::string> variables;  // shared by every location
  Matrix values;                       // days x (locations * vars), location-major
  std::size_t target_column = 0;
  std::size_t train_end = 0;           // first day index of the test range (== days if none)
  std::optional<std::size_t> test_first, test_last;

  [[nodiscard]] std::size_t days() const noexcept { return dates.size(); }
  [[nodiscard]] std::size_t columns() const noexcept { return values.cols(); }
  /// Day index of d; throws DataError if outside the axis.
  [[nodiscard]] std::size_t day_index(Date d) const;
};

Dataset load_dataset(const Manifest& manifest, MissingPolicy policy = MissingPolicy::error);

/// Per-column mean and population standard deviation.
struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  /// z-score; columns with zero deviation map to 0.
  [[nodiscard]] Vector apply(std::span<const double> row) const;
  [[nodiscard]] Vector invert(std::span<const double> z) const;

  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

/// Statistics over days [0, ds.train_end).
ColumnStats training_stats(const Dataset& ds);
ColumnStats column_stats(const Matrix& values, std::size_t first, std::size_t end);

/// Inclusive range of day indices.
struct DayRange {
  std::size_t first = 0;
  std::size_t last = 0;
  [[nodiscard]] std::size_t length() const noexcept { return last - first + 1; }
};

DayRange train_range(const Dataset& ds);
DayRange test_range(const Dataset& ds);
/// "train", "test", "all", or "YYYY-MM-DD,YYYY-MM-DD".
DayRange resolve_range(const Dataset& ds, std::string_view spec);

struct Window {
  std::vector<Vector> inputs;  // seq_len z-scored rows
  double target = 0.0;         // raw units
  std::size_t window_id = 0;   // day index of the first input row
  std::size_t target_day = 0;
};

/// Every window lying wholly inside range: inputs on days d..d+T-1 and target
/// on day d+T-1+q. Yields L-T-q+1 windows, or none if that is not positive.
/// Throws RangeTooShortError if the range cannot hold a single input sequence.
std::vector<Window> make_windows(const Dataset& ds, const ColumnStats& stats, std::size_t seq_len,
                                 std::size_t horizon, DayRange range);

}  // namespace stlstm
