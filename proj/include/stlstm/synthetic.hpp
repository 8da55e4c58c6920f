// SPDX-License-Identifier: Apache-2.0
//
// Coupled autoregressive multi-location generator standing in for real
// station data. Each location k carries a latent
//
//   s_k(t+1) = ar * ((1 - kappa) * s_k(t) + kappa * mean_{j != k} s_j(t - lag_jk)) + eps
//
// with eps ~ N(0, noise^2) and per-pair lags drawn from {1, 2}. Observed
// variables are fixed random linear readouts of s_k plus a shared seasonal
// term sin(2 pi t / 365) and observation noise. Variable 0 is "temperature".
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stlstm/data.hpp"
#include "stlstm/numerics.hpp"

namespace stlstm {

struct SyntheticConfig {
  std::size_t locations = 5;
  std::size_t vars = 3;
  std::size_t days = 800;
  double coupling = 0.6;  // kappa in [0, 1]
  std::uint64_t seed = 7;
  double ar = 0.7;
  double noise = 0.3;      // latent innovation standard deviation
  double obs_noise = 0.1;  // observation noise standard deviation
  std::size_t burn_in = 100;
  double test_fraction = 0.15;  // trailing share of days marked as the test range
  std::string start_date = "2007-01-01";

  /// Throws InvalidArgument on out-of-range settings.
  void validate() const;
};

struct SyntheticData {
  std::vector<Date> dates;
  Matrix latents;                       // locations x days
  std::vector<std::vector<int>> lags;   // lags[j][k]: lag of location j in location k's update
  std::vector<std::string> variables;
  std::vector<std::string> locations;
  std::vector<Matrix> observed;         // per location: days x vars
  std::size_t test_start_day = 0;
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

/// Writes <location>.csv per location and manifest.txt into dir (created if
/// needed). Returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

/// CSV text for one location, exactly as write_synthetic emits it.
std::string synthetic_csv(const SyntheticData& data, std::size_t location);

}  // namespace stlstm
