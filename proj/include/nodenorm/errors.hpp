#pragma once

#include <stdexcept>
#include <string>

namespace nodenorm {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter, model spec or option.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input values violate an operation's precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Sparse structure is malformed (non-symmetric, unsorted, out of range).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Dataset bundle could not be read or is inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nodenorm
