#pragma once

#include <stdexcept>
#include <string>

namespace sincfb {

/// Bad argument to any library operation (odd/even kernel length, negative gain, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration the implementation deliberately does not support.
class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pseudo-inverse requested for an operator with no nonzero singular value.
class SingularOperator : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value produced during a forward or backward pass; the message names the stage.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File format or filesystem problem.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sincfb
