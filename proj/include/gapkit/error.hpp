#pragma once

#include <stdexcept>
#include <string>

namespace gapkit {

// Failure categories map one-to-one onto the CLI exit codes:
// UsageError -> 1, DataError -> 2, DegenerateError -> 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent input data: malformed files, dimension mismatches,
/// non-finite values, insufficient samples.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical operation collapsed (zero norm, zero variance, divergence).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class VersionError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace gapkit
