#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tiepref {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric argument is outside the mathematical domain (NaN, infinity,
// or a key outside a model's table).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A model parameter violates its invariant (e.g. theta < 1).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

// Structured data violates a dataset/model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Synthetic data generation could not make progress.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// A text artifact could not be parsed; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// An iterative numeric routine failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training diverged; carries the epoch at which it happened.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

// A metric is undefined on the given input (e.g. empty after filtering).
class MetricError : public Error {
 public:
  using Error::Error;
};

// An API was called with mismatched shapes or unsupported options.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace tiepref
