#pragma once

#include <stdexcept>
#include <string>

namespace leo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (e.g. inner dimensions of a product).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A numeric precondition failed at runtime: non-positive pivot, zero
/// diagonal, non-finite activation, bracket failure.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an API contract (mismatched tape, bad parameter count).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid or incomplete configuration (missing checkpoint, bad grid).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step, unsigned long long seed)
      : Error(what), step_(step), seed_(seed) {}
  long step() const noexcept { return step_; }
  unsigned long long seed() const noexcept { return seed_; }

 private:
  long step_;
  unsigned long long seed_;
};

}  // namespace leo
