// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace stlstm::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kDivergence = 3,
  kVerification = 4,
};

/// Runs the command line; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stlstm::cli
