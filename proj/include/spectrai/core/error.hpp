#pragma once

#include <stdexcept>
#include <string>

namespace spectrai {

// Exception hierarchy. The CLI maps these onto exit codes, the service onto
// HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public RangeError {
 public:
  using RangeError::RangeError;
};

/// Raised when a network, loss or augmentation is not permitted for a task.
class GateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient; training aborts.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A stop request was honored.
class Interrupted : public Error {
 public:
  using Error::Error;
};

}  // namespace spectrai
