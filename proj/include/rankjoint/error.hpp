#pragma once

#include <stdexcept>
#include <string>

namespace rankjoint {

// Exception hierarchy. The C API maps each kind onto an rj_status code and
// the CLI maps those onto process exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed an argument outside an operation's domain.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Input data violates the schema or dataset invariants.
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical failure, e.g. a rank-deficient design matrix.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rankjoint
