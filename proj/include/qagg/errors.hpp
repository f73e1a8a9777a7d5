#pragma once

#include <stdexcept>
#include <string>

namespace qagg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (dimension mismatch,
/// non-finite data, off-simplex weights).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter lies outside its admissible range.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An unknown identifier or an unsupported combination of options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data or an I/O failure.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace qagg
