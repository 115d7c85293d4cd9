#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pagesamp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by an argument value (sizes, probabilities, weights).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

/// The problem kind does not provide the requested quantity.
class Unsupported : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration would exceed the outcome budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::int64_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::int64_t line() const { return line_; }

 private:
  std::int64_t line_;
};

/// An iterate or objective value became non-finite.
class Divergence : public Error {
 public:
  explicit Divergence(std::int64_t iteration)
      : Error("non-finite iterate or objective at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

}  // namespace pagesamp
