#pragma once

#include <stdexcept>

namespace evomem {

// Error taxonomy shared by every module. The command line tool maps
// ValidationError to exit code 1; a failed correctness check is exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, bad dimensions, malformed or unknown configuration keys.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// NaN or otherwise non-finite values where finite input is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. recording into a closed allocation ledger.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Inconsistent ledger event streams (free without a matching alloc).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace evomem
