// SPDX-License-Identifier: Apache-2.0
//
// Text checkpoint format:
//
//   stlstm-checkpoint v1
//   kind=stacked locations=5 vars=3 n1=20 n2=32 activation=tanh seq_len=10 horizon=1
//   <name> <rows> <cols>
//   <row 0 values, space separated>
//   ...
//   end
//
// Values use the shortest decimal form that parses back to the same double.
// Optional trailing records norm.mean / norm.std (1 x columns) carry the
// input normalization the model was trained with.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "stlstm/data.hpp"
#include "stlstm/model.hpp"

namespace stlstm {

inline constexpr std::string_view kCheckpointMagic = "stlstm-checkpoint";
inline constexpr std::string_view kCheckpointVersion = "v1";

struct Checkpoint {
  ModelSpec spec;
  ModelParams params;
  std::optional<ColumnStats> normalization;
};

std::string format_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointParseError, CheckpointVersionError or CheckpointShapeError.
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stlstm
