// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xmal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated (empty input, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Configuration values violate an invariant (D % K != 0, tau <= 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MissingFileError : public IoError {
 public:
  using IoError::IoError;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

// Truncated or otherwise malformed record payload.
class CorruptRecordError : public IoError {
 public:
  using IoError::IoError;
};

// Structurally valid container whose declared layout is not supported.
class SchemaError : public IoError {
 public:
  using IoError::IoError;
};

// A stored tensor does not match the shape implied by the active config.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error("non-finite loss at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace xmal
