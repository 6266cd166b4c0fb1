#pragma once

#include <stdexcept>
#include <string>

namespace fsl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument or flag value. Maps to process exit code 1.
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

/// Malformed or invalid data (files, records, schemas). Exit code 2.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Unreadable or unwritable paths. Exit code 2.
class IoError : public DataError {
 public:
  explicit IoError(const std::string& msg) : DataError(msg) {}
};

/// Numerical failure (non-finite values, singular systems). Exit code 3.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

/// Training-loop failure (divergence). Exit code 3.
class TrainingError : public NumericError {
 public:
  explicit TrainingError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace fsl
