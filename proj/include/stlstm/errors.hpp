// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace stlstm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: malformed spec, invalid config value, unreadable path.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Checkpoint failures. Each has its own type so callers can tell them apart.
class CheckpointParseError : public Error {
 public:
  using Error::Error;
};
class CheckpointVersionError : public Error {
 public:
  using Error::Error;
};
class CheckpointShapeError : public Error {
 public:
  using Error::Error;
};

// Dataset failures.
class DataError : public Error {
 public:
  using Error::Error;
};
class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};
class UnknownVariableError : public DataError {
 public:
  using DataError::DataError;
};
class CellParseError : public DataError {
 public:
  using DataError::DataError;
};
class MissingValueError : public DataError {
 public:
  using DataError::DataError;
};
class RangeTooShortError : public DataError {
 public:
  using DataError::DataError;
};

/// Training loss became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  [[nodiscard]] int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Two reports claim the same comparison cell.
class DuplicateCellError : public Error {
 public:
  using Error::Error;
};

}  // namespace stlstm
