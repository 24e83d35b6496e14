// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace arthdr {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (dilation < 1, zero extent, bad flag, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an API contract (non-scalar backward, fb_prev at t = 1, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Value outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed file payload. Carries the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed file whose content violates an image invariant (NaN, negative radiance).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace arthdr
