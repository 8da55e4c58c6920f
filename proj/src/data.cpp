// SPDX-License-Identifier: Apache-2.0
#include "stlstm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stlstm/errors.hpp"

namespace stlstm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      return out;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN";
}

struct LocationTable {
  std::vector<std::string> variables;
  std::vector<Date> dates;
  std::vector<std::vector<std::optional<double>>> rows;
};

LocationTable read_location_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw CellParseError(path.string() + ": empty file");
  auto header = split(line, ',');
  if (header.empty() || header[0] != "date") {
    throw CellParseError(path.string() + ": header must start with 'date'");
  }
  LocationTable table;
  for (std::size_t i = 1; i < header.size(); ++i) table.variables.emplace_back(header[i]);
  if (table.variables.empty()) throw CellParseError(path.string() + ": no variables in header");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw CellParseError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()));
    }
    Date d;
    try {
      d = parse_date(cells[0]);
    } catch (const InvalidArgument& e) {
      throw CellParseError(where + ": " + e.what());
    }
    std::vector<std::optional<double>> row;
    row.reserve(table.variables.size());
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (is_missing(cells[i])) {
        row.emplace_back(std::nullopt);
        continue;
      }
      double v = 0.0;
      const char* end = cells[i].data() + cells[i].size();
      auto [ptr, ec] = std::from_chars(cells[i].data(), end, v);
      if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw CellParseError(where + ": cannot parse '" + std::string(cells[i]) + "' for " +
                             table.variables[i - 1]);
      }
      row.emplace_back(v);
    }
    table.dates.push_back(d);
    table.rows.push_back(std::move(row));
  }
  if (table.dates.empty()) throw CellParseError(path.string() + ": no data rows");
  for (std::size_t i = 1; i < table.dates.size(); ++i) {
    if (table.dates[i] != table.dates[i - 1] + std::chrono::days{1}) {
      throw AlignmentError(path.string() + ": dates not consecutive between " +
                           format_date(table.dates[i - 1]) + " and " + format_date(table.dates[i]));
    }
  }
  return table;
}

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  auto bad = [&] { return InvalidArgument("invalid date '" + std::string(text) + "' (want YYYY-MM-DD)"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  auto num = [&](std::size_t off, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + off, text.data() + off + len, v);
    if (ec != std::errc() || ptr != text.data() + off + len) throw bad();
    return v;
  };
  const std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::size_t Manifest::target_location_index() const {
  for (std::size_t k = 0; k < locations.size(); ++k) {
    if (locations[k].name == target_location) return k;
  }
  throw DataError("target location '" + target_location + "' is not listed in the manifest");
}

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("target=")) {
      const auto spec = line.substr(7);
      const auto colon = spec.find(':');
      if (colon == std::string_view::npos) {
        throw InvalidArgument("manifest: target must be <location>:<variable>");
      }
      m.target_location = std::string(trim(spec.substr(0, colon)));
      m.target_variable = std::string(trim(spec.substr(colon + 1)));
      continue;
    }
    if (line.starts_with("test_start=") || line.starts_with("test_end=")) {
      for (std::string_view kv : split(line, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) throw InvalidArgument("manifest: bad entry '" + std::string(kv) + "'");
        const auto key = trim(kv.substr(0, eq));
        const Date d = parse_date(kv.substr(eq + 1));
        if (key == "test_start") {
          m.test_start = d;
        } else if (key == "test_end") {
          m.test_end = d;
        } else {
          throw InvalidArgument("manifest: unknown key '" + std::string(key) + "'");
        }
      }
      continue;
    }
    auto parts = split(line, ',');
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
      throw InvalidArgument("manifest: expected 'location,path', got '" + std::string(line) + "'");
    }
    std::filesystem::path p{std::string(parts[1])};
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    m.locations.push_back({std::string(parts[0]), p});
  }
  if (m.locations.empty()) throw InvalidArgument("manifest lists no locations");
  if (m.target_location.empty()) throw InvalidArgument("manifest has no target= line");
  static_cast<void>(m.target_location_index());
  if (m.test_end && !m.test_start) throw InvalidArgument("manifest: test_end without test_start");
  if (m.test_start && m.test_end && *m.test_end < *m.test_start) {
    throw InvalidArgument("manifest: test_end precedes test_start");
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InvalidArgument("manifest not found: " + path.string());
  return parse_manifest(read_file(path), path.parent_path());
}

std::string format_manifest(const Manifest& manifest) {
  std::ostringstream os;
  for (const auto& loc : manifest.locations) os << loc.name << ',' << loc.csv.string() << '\n';
  os << "target=" << manifest.target_location << ':' << manifest.target_variable << '\n';
  if (manifest.test_start) {
    os << "test_start=" << format_date(*manifest.test_start);
    if (manifest.test_end) os << ",test_end=" << format_date(*manifest.test_end);
    os << '\n';
  }
  return os.str();
}

MissingPolicy parse_missing_policy(std::string_view name) {
  if (name == "error") return MissingPolicy::error;
  if (name == "ffill") return MissingPolicy::ffill;
  throw InvalidArgument("unknown missing-value policy '" + std::string(name) + "'");
}

std::size_t Dataset::day_index(Date d) const {
  if (dates.empty() || d < dates.front() || d > dates.back()) {
    throw DataError("date " + format_date(d) + " is outside the dataset (" +
                    (dates.empty() ? std::string("empty") :
                     format_date(dates.front()) + " .. " + format_date(dates.back())) + ")");
  }
  return static_cast<std::size_t>((d - dates.front()).count());
}

Dataset load_dataset(const Manifest& manifest, MissingPolicy policy) {
  std::vector<LocationTable> tables;
  tables.reserve(manifest.locations.size());
  for (const auto& loc : manifest.locations) tables.push_back(read_location_csv(loc.csv));

  Dataset ds;
  ds.variables = tables[0].variables;
  ds.dates = tables[0].dates;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const auto& t = tables[k];
    const std::string& name = manifest.locations[k].name;
    if (t.variables != ds.variables) {
      for (const auto& v : t.variables) {
        if (std::find(ds.variables.begin(), ds.variables.end(), v) == ds.variables.end()) {
          throw UnknownVariableError("location " + name + " has variable '" + v +
                                     "' not declared by " + manifest.locations[0].name);
        }
      }
      throw UnknownVariableError("location " + name + " declares variables in a different order or count");
    }
    if (t.dates.front() != ds.dates.front() || t.dates.back() != ds.dates.back()) {
      throw AlignmentError("location " + name + " covers " + format_date(t.dates.front()) + " .. " +
                           format_date(t.dates.back()) + " but " + manifest.locations[0].name +
                           " covers " + format_date(ds.dates.front()) + " .. " +
                           format_date(ds.dates.back()));
    }
    ds.locations.push_back(name);
  }

  const std::size_t c = tables.size();
  const std::size_t m = ds.variables.size();
  const std::size_t L = ds.dates.size();
  ds.values = Matrix(L, c * m);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t day = 0; day < L; ++day) {
      for (std::size_t v = 0; v < m; ++v) {
        const auto& cell = tables[k].rows[day][v];
        double value = 0.0;
        if (cell) {
          value = *cell;
        } else if (policy == MissingPolicy::ffill && day > 0) {
          value = ds.values(day - 1, k * m + v);
        } else {
          throw MissingValueError("missing " + ds.variables[v] + " at " + ds.locations[k] + " on " +
                                  format_date(ds.dates[day]) +
                                  (policy == MissingPolicy::ffill ? " (no earlier value to copy)" : ""));
        }
        ds.values(day, k * m + v) = value;
      }
    }
  }

  const auto var_it = std::find(ds.variables.begin(), ds.variables.end(), manifest.target_variable);
  if (var_it == ds.variables.end()) {
    throw UnknownVariableError("target variable '" + manifest.target_variable + "' not in CSV header");
  }
  ds.target_column = manifest.target_location_index() * m +
                     static_cast<std::size_t>(var_it - ds.variables.begin());

  ds.train_end = L;
  if (manifest.test_start) {
    ds.train_end = ds.day_index(*manifest.test_start);
    ds.test_first = ds.train_end;
    ds.test_last = manifest.test_end ? ds.day_index(*manifest.test_end) : L - 1;
  }
  return ds;
}

Vector ColumnStats::apply(std::span<const double> row) const {
  Vector z(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    z[j] = stddev[j] > 0.0 ? (row[j] - mean[j]) / stddev[j] : 0.0;
  }
  return z;
}

Vector ColumnStats::invert(std::span<const double> z) const {
  Vector row(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) row[j] = z[j] * stddev[j] + mean[j];
  return row;
}

ColumnStats column_stats(const Matrix& values, std::size_t first, std::size_t end) {
  if (end <= first) throw DataError("no rows to compute normalization statistics from");
  const std::size_t cols = values.cols();
  ColumnStats s;
  s.mean.assign(cols, 0.0);
  s.stddev.assign(cols, 0.0);
  const double count = static_cast<double>(end - first);
  for (std::size_t r = first; r < end; ++r)
    for (std::size_t j = 0; j < cols; ++j) s.mean[j] += values(r, j);
  for (double& mu : s.mean) mu /= count;
  for (std::size_t r = first; r < end; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = values(r, j) - s.mean[j];
      s.stddev[j] += d * d;
    }
  }
  for (double& sd : s.stddev) sd = std::sqrt(sd / count);
  return s;
}

ColumnStats training_stats(const Dataset& ds) { return column_stats(ds.values, 0, ds.train_end); }

DayRange train_range(const Dataset& ds) {
  if (ds.train_end == 0) throw DataError("test range starts on the first day; no training data");
  return {0, ds.train_end - 1};
}

DayRange test_range(const Dataset& ds) {
  if (!ds.test_first) throw DataError("manifest defines no test range (test_start=...)");
  return {*ds.test_first, *ds.test_last};
}

DayRange resolve_range(const Dataset& ds, std::string_view spec) {
  if (spec == "train") return train_range(ds);
  if (spec == "test") return test_range(ds);
  if (spec == "all") return {0, ds.days() - 1};
  auto parts = split(spec, ',');
  if (parts.size() != 2) {
    throw InvalidArgument("range must be train, test, all or START,END dates; got '" +
                          std::string(spec) + "'");
  }
  const DayRange r{ds.day_index(parse_date(parts[0])), ds.day_index(parse_date(parts[1]))};
  if (r.last < r.first) throw InvalidArgument("range end precedes start: " + std::string(spec));
  return r;
}

std::vector<Window> make_windows(const Dataset& ds, const ColumnStats& stats, std::size_t seq_len,
                                 std::size_t horizon, DayRange range) {
  if (range.last < range.first || range.last >= ds.days()) {
    throw InvalidArgument("window range outside the dataset");
  }
  const std::size_t L = range.length();
  if (L < seq_len) {
    throw RangeTooShortError("range too short: " + std::to_string(L) + " days cannot hold a " +
                             std::to_string(seq_len) + "-day input sequence");
  }
  std::vector<Window> out;
  if (L < seq_len + horizon) return out;
  const std::size_t count = L - seq_len - horizon + 1;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Window win;
    win.window_id = range.first + w;
    win.target_day = win.window_id + seq_len - 1 + horizon;
    win.inputs.reserve(seq_len);
    for (std::size_t t = 0; t < seq_len; ++t) {
      win.inputs.push_back(stats.apply(ds.values.row(win.window_id + t)));
    }
    win.target = ds.values(win.target_day, ds.target_column);
    out.push_back(std::move(win));
  }
  return out;
}

}  // namespace stlstm
