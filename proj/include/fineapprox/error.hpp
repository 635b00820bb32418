#pragma once

#include <stdexcept>
#include <string>

namespace fineapprox {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (bad kind, non-positive tolerance, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (dimension mismatch, empty set).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A parameter search could not meet its target within its hard limits.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A construction step failed its own post-condition check.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A point lies outside the region where an operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A certified runtime bound was violated during evaluation.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Floating-point overflow of a closed-form quantity.
class RangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace fineapprox
