// SPDX-License-Identifier: Apache-2.0
#include "stlstm/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "stlstm/errors.hpp"

namespace stlstm {

namespace {

void check_pair(std::span<const double> preds, std::span<const double> truths, const char* op) {
  if (preds.size() != truths.size()) {
    throw InvalidArgument(std::string(op) + ": " + std::to_string(preds.size()) +
                          " predictions vs " + std::to_string(truths.size()) + " truths");
  }
  if (preds.empty()) throw InvalidArgument(std::string(op) + ": no values");
}

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("eval report: bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::size_t parse_size(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("eval report: bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

// Values that agree at the printed precision count as a tie.
double displayed(double v) { return std::round(v * 1e4) / 1e4; }

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

double mae(std::span<const double> preds, std::span<const double> truths) {
  check_pair(preds, truths, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - truths[i]);
  return s / static_cast<double>(preds.size());
}

double mse(std::span<const double> preds, std::span<const double> truths) {
  check_pair(preds, truths, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - truths[i];
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

double median_lower(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty list");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

EvalReport make_report(std::string testset, const ModelSpec& spec, std::string target,
                       std::vector<std::size_t> window_ids, std::vector<double> predictions,
                       std::vector<double> truths) {
  EvalReport r;
  r.testset = std::move(testset);
  r.kind = spec.kind;
  r.horizon = spec.horizon;
  r.target = std::move(target);
  r.activation = spec.activation;
  r.mae = mae(predictions, truths);
  r.mse = mse(predictions, truths);
  r.window_ids = std::move(window_ids);
  r.predictions = std::move(predictions);
  r.truths = std::move(truths);
  return r;
}

std::string format_report(const EvalReport& r) {
  if (r.testset.empty() || r.testset.find_first_of(" \t\n=") != std::string::npos) {
    throw InvalidArgument("testset name must be non-empty without spaces or '=': '" + r.testset + "'");
  }
  std::ostringstream os;
  os << "stlstm-eval v1\n";
  os << "testset=" << r.testset << " kind=" << to_string(r.kind) << " horizon=" << r.horizon
     << " target=" << r.target << " activation=" << to_string(r.activation)
     << " n_windows=" << r.n_windows() << " mae=" << shortest(r.mae) << " mse=" << shortest(r.mse)
     << '\n';
  os << "window_id,prediction,truth\n";
  for (std::size_t i = 0; i < r.n_windows(); ++i) {
    os << r.window_ids[i] << ',' << shortest(r.predictions[i]) << ',' << shortest(r.truths[i])
       << '\n';
  }
  return os.str();
}

EvalReport parse_report(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "stlstm-eval v1") {
    throw InvalidArgument("not an eval report (missing 'stlstm-eval v1' header)");
  }
  if (!std::getline(in, line)) throw InvalidArgument("eval report truncated");
  EvalReport r;
  std::size_t n = 0;
  std::istringstream kv(line);
  std::string token;
  while (kv >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw InvalidArgument("eval report: bad field '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "testset") r.testset = value;
    else if (key == "kind") r.kind = parse_model_kind(value);
    else if (key == "horizon") r.horizon = parse_size(value, key);
    else if (key == "target") r.target = value;
    else if (key == "activation") r.activation = parse_activation(value);
    else if (key == "n_windows") n = parse_size(value, key);
    else if (key == "mae") r.mae = parse_double(value, key);
    else if (key == "mse") r.mse = parse_double(value, key);
    else throw InvalidArgument("eval report: unknown field '" + key + "'");
  }
  if (!std::getline(in, line) || line != "window_id,prediction,truth") {
    throw InvalidArgument("eval report: missing window table header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::string_view sv(line);
    const auto c1 = sv.find(',');
    const auto c2 = sv.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos) {
      throw InvalidArgument("eval report: bad row '" + line + "'");
    }
    r.window_ids.push_back(parse_size(sv.substr(0, c1), "window_id"));
    r.predictions.push_back(parse_double(sv.substr(c1 + 1, c2 - c1 - 1), "prediction"));
    r.truths.push_back(parse_double(sv.substr(c2 + 1), "truth"));
  }
  if (r.n_windows() != n) {
    throw InvalidArgument("eval report: header says " + std::to_string(n) + " windows, found " +
                          std::to_string(r.n_windows()));
  }
  return r;
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write report " + path.string());
  out << format_report(report);
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open report " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

ComparisonTable comparison_report(std::span<const EvalReport> reports) {
  using Key = std::tuple<std::string, std::size_t, std::string, int>;
  struct Cell {
    const EvalReport* stacked = nullptr;
    const EvalReport* st_stacked = nullptr;
  };
  std::map<Key, Cell> cells;
  for (const EvalReport& r : reports) {
    Cell& cell = cells[Key{r.testset, r.horizon, r.target, static_cast<int>(r.activation)}];
    const EvalReport*& slot = r.kind == ModelKind::stacked ? cell.stacked : cell.st_stacked;
    if (slot) {
      throw DuplicateCellError("two " + std::string(to_string(r.kind)) + " reports for testset " +
                               r.testset + ", steps ahead " + std::to_string(r.horizon) +
                               ", target " + r.target + ", activation " +
                               std::string(to_string(r.activation)));
    }
    slot = &r;
  }

  ComparisonTable table;
  for (const auto& [key, cell] : cells) {
    for (const char* metric : {"MAE", "MSE"}) {
      ComparisonRow row;
      row.testset = std::get<0>(key);
      row.steps_ahead = std::get<1>(key);
      row.target = std::get<2>(key);
      row.activation = static_cast<InnerActivation>(std::get<3>(key));
      row.metric = metric;
      const bool is_mae = row.metric == "MAE";
      if (cell.stacked) row.stacked = is_mae ? cell.stacked->mae : cell.stacked->mse;
      if (cell.st_stacked) row.st_stacked = is_mae ? cell.st_stacked->mae : cell.st_stacked->mse;
      if (row.stacked && row.st_stacked) {
        const double a = displayed(*row.stacked);
        const double b = displayed(*row.st_stacked);
        row.winner = a == b ? "tie" : (a < b ? "stacked" : "st_stacked");
      } else {
        row.winner = "-";
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::string ComparisonTable::to_text() const {
  auto value = [](const std::optional<double>& v, bool best) {
    if (!v) return std::string("-");
    return fixed4(*v) + (best ? "*" : "");
  };
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %5s %-22s %-10s %-6s %14s %14s  %s\n", "testset", "steps",
                "target", "activation", "metric", "stacked", "st_stacked", "winner");
  os << buf;
  for (const ComparisonRow& r : rows) {
    const bool tie = r.winner == "tie";
    std::snprintf(buf, sizeof buf, "%-12s %5zu %-22s %-10s %-6s %14s %14s  %s\n",
                  r.testset.c_str(), r.steps_ahead, r.target.c_str(),
                  std::string(to_string(r.activation)).c_str(), r.metric.c_str(),
                  value(r.stacked, tie || r.winner == "stacked").c_str(),
                  value(r.st_stacked, tie || r.winner == "st_stacked").c_str(), r.winner.c_str());
    os << buf;
  }
  return os.str();
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream os;
  os << "testset,steps_ahead,target,activation,metric,stacked,st_stacked,winner\n";
  for (const ComparisonRow& r : rows) {
    os << r.testset << ',' << r.steps_ahead << ',' << r.target << ',' << to_string(r.activation)
       << ',' << r.metric << ',' << (r.stacked ? shortest(*r.stacked) : "") << ','
       << (r.st_stacked ? shortest(*r.st_stacked) : "") << ',' << r.winner << '\n';
  }
  return os.str();
}

}  // namespace stlstm
