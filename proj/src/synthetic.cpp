// SPDX-License-Identifier: Apache-2.0
#include "stlstm/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "stlstm/errors.hpp"

namespace stlstm {

void SyntheticConfig::validate() const {
  if (locations < 1) throw InvalidArgument("locations must be >= 1");
  if (vars < 1) throw InvalidArgument("vars must be >= 1");
  if (days < 50) throw InvalidArgument("days must be >= 50 (got " + std::to_string(days) + ")");
  if (!(coupling >= 0.0 && coupling <= 1.0)) throw InvalidArgument("coupling must lie in [0, 1]");
  if (!(ar > -1.0 && ar < 1.0)) throw InvalidArgument("ar must lie in (-1, 1)");
  if (!(noise >= 0.0) || !(obs_noise >= 0.0)) throw InvalidArgument("noise levels must be >= 0");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("test_fraction must lie in [0, 1)");
  }
  parse_date(start_date);
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.locations;
  const std::size_t m = cfg.vars;
  const std::size_t total = cfg.days + cfg.burn_in;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> lag_dist(1, 2);
  std::normal_distribution<double> eps(0.0, 1.0);

  SyntheticData out;
  out.lags.assign(c, std::vector<int>(c, 0));
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t k = 0; k < c; ++k)
      if (j != k) out.lags[j][k] = lag_dist(rng);

  // Readout weights: temperature reads the latent with unit gain and the full
  // seasonal cycle; other variables get random gains.
  std::uniform_real_distribution<double> gain(0.5, 1.5);
  std::uniform_real_distribution<double> season_gain(-1.0, 1.0);
  std::vector<std::vector<double>> alpha(c, std::vector<double>(m));
  std::vector<std::vector<double>> beta(c, std::vector<double>(m));
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t v = 0; v < m; ++v) {
      alpha[k][v] = v == 0 ? 1.0 : gain(rng);
      beta[k][v] = v == 0 ? 1.0 : season_gain(rng);
    }
  }

  Matrix s(c, total);
  for (std::size_t t = 0; t + 1 < total; ++t) {
    for (std::size_t k = 0; k < c; ++k) {
      double cross = 0.0;
      if (c > 1) {
        for (std::size_t j = 0; j < c; ++j) {
          if (j == k) continue;
          const auto lag = static_cast<std::size_t>(out.lags[j][k]);
          cross += t >= lag ? s(j, t - lag) : 0.0;
        }
        cross /= static_cast<double>(c - 1);
      }
      const double mix = (1.0 - cfg.coupling) * s(k, t) + cfg.coupling * cross;
      s(k, t + 1) = cfg.ar * mix + cfg.noise * eps(rng);
    }
  }

  out.latents = Matrix(c, cfg.days);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t t = 0; t < cfg.days; ++t) out.latents(k, t) = s(k, t + cfg.burn_in);

  const Date start = parse_date(cfg.start_date);
  out.dates.reserve(cfg.days);
  for (std::size_t t = 0; t < cfg.days; ++t) {
    out.dates.push_back(start + std::chrono::days{static_cast<int>(t)});
  }

  out.variables.push_back("temperature");
  for (std::size_t v = 1; v < m; ++v) out.variables.push_back("var" + std::to_string(v + 1));
  for (std::size_t k = 0; k < c; ++k) out.locations.push_back("loc" + std::to_string(k + 1));

  out.observed.assign(c, Matrix(cfg.days, m));
  for (std::size_t t = 0; t < cfg.days; ++t) {
    const double season = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 365.0);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t v = 0; v < m; ++v) {
        out.observed[k](t, v) =
            alpha[k][v] * out.latents(k, t) + beta[k][v] * season + cfg.obs_noise * eps(rng);
      }
    }
  }

  out.test_start_day = cfg.days - static_cast<std::size_t>(
                                      std::floor(cfg.test_fraction * static_cast<double>(cfg.days)));
  return out;
}

std::string synthetic_csv(const SyntheticData& data, std::size_t location) {
  std::ostringstream os;
  os << "date";
  for (const auto& v : data.variables) os << ',' << v;
  os << '\n';
  const Matrix& obs = data.observed.at(location);
  char buf[32];
  for (std::size_t t = 0; t < data.dates.size(); ++t) {
    os << format_date(data.dates[t]);
    for (std::size_t v = 0; v < obs.cols(); ++v) {
      std::snprintf(buf, sizeof buf, "%.6f", obs(t, v));
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::filesystem::path write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create " + dir.string() + ": " + ec.message());

  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << text;
    if (!out) throw InvalidArgument("write failed for " + path.string());
  };

  std::ostringstream manifest;
  for (std::size_t k = 0; k < data.locations.size(); ++k) {
    const std::string file = data.locations[k] + ".csv";
    write(dir / file, synthetic_csv(data, k));
    manifest << data.locations[k] << ',' << file << '\n';
  }
  manifest << "target=" << data.locations[0] << ':' << data.variables[0] << '\n';
  if (data.test_start_day < data.dates.size()) {
    manifest << "test_start=" << format_date(data.dates[data.test_start_day])
             << ",test_end=" << format_date(data.dates.back()) << '\n';
  }
  const auto path = dir / "manifest.txt";
  write(path, manifest.str());
  return path;
}

}  // namespace stlstm
