#pragma once

#include <stdexcept>
#include <string>

namespace qatlaw {

// Base of all library errors. The three direct branches map onto the CLI
// exit-code contract: DomainError -> 2, SchemaError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Input-format problems (bad CSV/JSON shape, unknown enum token, missing file).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InvalidValue : public DomainError {
 public:
  using DomainError::DomainError;
};

class GranularityMismatch : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateSample : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateInput : public DomainError {
 public:
  using DomainError::DomainError;
};

class InsufficientData : public DomainError {
 public:
  using DomainError::DomainError;
};

class SingularDesign : public DomainError {
 public:
  using DomainError::DomainError;
};

class NonPositiveDelta : public DomainError {
 public:
  using DomainError::DomainError;
};

class ValidationError : public DomainError {
 public:
  using DomainError::DomainError;
};

class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

class NonFiniteLoss : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteGradient : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteObjective : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace qatlaw
