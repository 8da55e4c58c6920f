// SPDX-License-Identifier: Apache-2.0
#include "stlstm/checkpoint.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "stlstm/errors.hpp"

namespace stlstm {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

void append_record(std::string& out, std::string_view name, std::span<const double> values,
                   std::size_t rows, std::size_t cols) {
  out.append(name);
  out += ' ' + std::to_string(rows) + ' ' + std::to_string(cols) + '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += ' ';
      append_double(out, values[r * cols + c]);
    }
    out += '\n';
  }
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string_view next(std::string_view what) {
    if (pos_ >= text_.size()) {
      throw CheckpointParseError("checkpoint truncated: expected " + std::string(what) +
                                 " at line " + std::to_string(line_ + 1));
    }
    const auto nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos) {
      throw CheckpointParseError("checkpoint truncated: unterminated line " +
                                 std::to_string(line_ + 1));
    }
    const auto line = text_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    ++line_;
    return line;
  }

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

struct RecordHeader {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

RecordHeader parse_header(std::string_view line, std::size_t line_no) {
  std::istringstream is{std::string(line)};
  RecordHeader h;
  std::string extra;
  if (!(is >> h.name >> h.rows >> h.cols) || (is >> extra)) {
    throw CheckpointParseError("bad record header at line " + std::to_string(line_no) + ": '" +
                               std::string(line) + "'");
  }
  return h;
}

std::vector<double> parse_values(LineReader& in, const RecordHeader& h) {
  std::vector<double> values;
  values.reserve(h.rows * h.cols);
  for (std::size_t r = 0; r < h.rows; ++r) {
    const std::string_view line = in.next("row " + std::to_string(r) + " of " + h.name);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t c = 0; c < h.cols; ++c) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || next == p) {
        throw CheckpointParseError("bad value in " + h.name + " at line " +
                                   std::to_string(in.line()));
      }
      values.push_back(v);
      p = next;
    }
    while (p < end && *p == ' ') ++p;
    if (p != end) {
      throw CheckpointParseError("too many values in " + h.name + " at line " +
                                 std::to_string(in.line()));
    }
  }
  return values;
}

}  // namespace

std::string format_checkpoint(const Checkpoint& ckpt) {
  check_params(ckpt.spec, ckpt.params);
  std::string out;
  out.append(kCheckpointMagic);
  out += ' ';
  out.append(kCheckpointVersion);
  out += '\n';
  out += ckpt.spec.to_kv() + '\n';
  visit_model_tensors(ckpt.params, ckpt.spec.kind,
                      [&](const std::string& name, const ConstTensorRef& t) {
                        append_record(out, name, t.values, t.rows, t.cols);
                      });
  if (ckpt.normalization) {
    const auto& n = *ckpt.normalization;
    append_record(out, "norm.mean", n.mean, 1, n.mean.size());
    append_record(out, "norm.std", n.stddev, 1, n.stddev.size());
  }
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(std::string_view text) {
  LineReader in(text);
  const std::string_view magic = in.next("header");
  const auto sp = magic.find(' ');
  if (sp == std::string_view::npos || magic.substr(0, sp) != kCheckpointMagic) {
    throw CheckpointParseError("not a checkpoint file (missing '" + std::string(kCheckpointMagic) +
                               "' header)");
  }
  if (magic.substr(sp + 1) != kCheckpointVersion) {
    throw CheckpointVersionError("unsupported checkpoint version '" +
                                 std::string(magic.substr(sp + 1)) + "' (expected " +
                                 std::string(kCheckpointVersion) + ")");
  }

  Checkpoint ckpt;
  try {
    ckpt.spec = ModelSpec::from_kv(in.next("model spec"));
  } catch (const InvalidArgument& e) {
    throw CheckpointParseError(std::string("bad model spec line: ") + e.what());
  }
  ckpt.params = zero_params(ckpt.spec);

  visit_model_tensors(ckpt.params, ckpt.spec.kind, [&](const std::string& name, const TensorRef& t) {
    const RecordHeader h = parse_header(in.next("record " + name), in.line());
    if (h.name != name) {
      throw CheckpointShapeError("expected tensor " + name + " at line " +
                                 std::to_string(in.line()) + ", found " + h.name);
    }
    if (h.rows != t.rows || h.cols != t.cols) {
      throw CheckpointShapeError("tensor " + name + " is " + std::to_string(h.rows) + "x" +
                                 std::to_string(h.cols) + " but the spec requires " +
                                 std::to_string(t.rows) + "x" + std::to_string(t.cols));
    }
    const auto values = parse_values(in, h);
    std::copy(values.begin(), values.end(), t.values.begin());
  });

  std::string_view line = in.next("end");
  if (line != "end") {
    const RecordHeader mean_h = parse_header(line, in.line());
    if (mean_h.name != "norm.mean" || mean_h.rows != 1) {
      throw CheckpointShapeError("unexpected record " + mean_h.name + " after model tensors");
    }
    ColumnStats stats;
    stats.mean = parse_values(in, mean_h);
    const RecordHeader std_h = parse_header(in.next("norm.std"), in.line());
    if (std_h.name != "norm.std" || std_h.rows != 1 || std_h.cols != mean_h.cols) {
      throw CheckpointShapeError("norm.std must follow norm.mean with the same shape");
    }
    stats.stddev = parse_values(in, std_h);
    if (stats.mean.size() != ckpt.spec.input_dim()) {
      throw CheckpointShapeError("normalization has " + std::to_string(stats.mean.size()) +
                                 " columns, model input has " +
                                 std::to_string(ckpt.spec.input_dim()));
    }
    ckpt.normalization = std::move(stats);
    line = in.next("end");
  }
  if (line != "end") throw CheckpointParseError("expected 'end' at line " + std::to_string(in.line()));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = format_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write checkpoint " + path.string());
  out << text;
  if (!out) throw InvalidArgument("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace stlstm
