#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sigkit {

// Base class for every error the engine raises.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text. Carries the 1-based row number of the offending line.
class ParseError : public Error {
public:
  ParseError(std::size_t row, const std::string& msg)
      : Error("row " + std::to_string(row) + ": " + msg), row_(row) {}

  std::size_t row() const { return row_; }

private:
  std::size_t row_;
};

// Well-formed input that violates a documented invariant.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& msg) : Error(msg), row_(0) {}
  ValidationError(std::size_t row, const std::string& msg)
      : Error("row " + std::to_string(row) + ": " + msg), row_(row) {}

  // 0 when the violation is not tied to a single row.
  std::size_t row() const { return row_; }

private:
  std::size_t row_;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class InsufficientDataError : public Error {
public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// Singular matrix, non-finite intermediate, degenerate sample.
class NumericalError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  using Error::Error;
};

}  // namespace sigkit
