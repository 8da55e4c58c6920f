// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stlstm/data.hpp"
#include "stlstm/lstm_core.hpp"
#include "stlstm/model.hpp"

namespace testing {

using namespace stlstm;

inline void fill_uniform(CellParams& p, std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  visit_tensors(p, [&](const TensorRef& t) {
    for (double& v : t.values) v = u(rng);
  });
}

inline ModelParams random_params(const ModelSpec& spec, std::mt19937_64& rng, double r = 0.5) {
  ModelParams p = zero_params(spec);
  std::uniform_real_distribution<double> u(-r, r);
  visit_model_tensors(p, spec.kind, [&](const std::string&, const TensorRef& t) {
    for (double& v : t.values) v = u(rng);
  });
  return p;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

inline std::vector<Vector> random_window(const ModelSpec& spec, std::mt19937_64& rng) {
  std::vector<Vector> w;
  for (std::size_t t = 0; t < spec.seq_len; ++t) w.push_back(random_vector(spec.input_dim(), rng));
  return w;
}

/// Per-element evaluation of one peephole step, written independently of
/// cell_forward: explicit loops, no shared helpers.
inline CellState scalar_cell_step(const CellParams& p, const CellState& prev, const Vector& x,
                                  InnerActivation act) {
  const std::size_t n = p.n(), d = p.d();
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  auto g = [&](double z) { return act == InnerActivation::tanh ? std::tanh(z) : sig(z); };
  CellState out(n);
  for (std::size_t r = 0; r < n; ++r) {
    double ai = p.b_i[r], af = p.b_f[r], ac = p.b_c[r], ao = p.b_o[r];
    for (std::size_t j = 0; j < d; ++j) {
      ai += p.W_xi(r, j) * x[j];
      af += p.W_xf(r, j) * x[j];
      ac += p.W_xc(r, j) * x[j];
      ao += p.W_xo(r, j) * x[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      ai += p.W_hi(r, j) * prev.h[j];
      af += p.W_hf(r, j) * prev.h[j];
      ac += p.W_hc(r, j) * prev.h[j];
      ao += p.W_ho(r, j) * prev.h[j];
    }
    const double i = sig(ai + p.w_ci[r] * prev.c[r]);
    const double f = sig(af + p.w_cf[r] * prev.c[r]);
    const double c = f * prev.c[r] + i * g(ac);
    const double o = sig(ao + p.w_co[r] * c);
    out.c[r] = c;
    out.h[r] = o * g(c);
  }
  return out;
}

/// Removes the directory on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("stlstm-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Small on-disk dataset: value(location, day, var) for every cell, dates from
/// 2010-01-01, target loc0:v0. test_first is a day index or -1 for none.
struct Fixture {
  std::size_t locations = 2;
  std::size_t vars = 2;
  std::size_t days = 30;
  int test_first = -1;
  int test_last = -1;
  std::function<double(std::size_t, std::size_t, std::size_t)> value =
      [](std::size_t k, std::size_t t, std::size_t v) {
        return 100.0 * static_cast<double>(k) + static_cast<double>(t) +
               0.01 * static_cast<double>(v);
      };

  std::filesystem::path write(const std::filesystem::path& dir) const {
    const Date start = parse_date("2010-01-01");
    std::string manifest;
    for (std::size_t k = 0; k < locations; ++k) {
      std::string csv = "date";
      for (std::size_t v = 0; v < vars; ++v) csv += ",v" + std::to_string(v);
      csv += "\n";
      for (std::size_t t = 0; t < days; ++t) {
        csv += format_date(start + std::chrono::days(t));
        for (std::size_t v = 0; v < vars; ++v) {
          char buf[64];
          std::snprintf(buf, sizeof buf, ",%.17g", value(k, t, v));
          csv += buf;
        }
        csv += "\n";
      }
      const std::string name = "loc" + std::to_string(k);
      write_file(dir / (name + ".csv"), csv);
      manifest += name + "," + name + ".csv\n";
    }
    manifest += "target=loc0:v0\n";
    if (test_first >= 0) {
      manifest += "test_start=" + format_date(start + std::chrono::days(test_first)) +
                  ",test_end=" + format_date(start + std::chrono::days(test_last)) + "\n";
    }
    write_file(dir / "manifest.txt", manifest);
    return dir / "manifest.txt";
  }
};

}  // namespace testing
