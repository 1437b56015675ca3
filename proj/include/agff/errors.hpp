// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agff {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// A malformed record in a row-oriented input file. `row()` is 1-based.
class RowFormatError : public FormatError {
 public:
  RowFormatError(std::size_t row, const std::string& what)
      : FormatError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A malformed line in a line-oriented text file. `line()` is 1-based.
class LineFormatError : public FormatError {
 public:
  LineFormatError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class StratifyError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Misuse of an API contract (e.g. backward from a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptyDocumentError : public Error {
 public:
  using Error::Error;
};

class TrainError : public Error {
 public:
  using Error::Error;
};

class ModeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced anywhere in the numeric pipeline.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace agff
