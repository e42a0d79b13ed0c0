#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neuroute {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (topology, CSV, config). Carries the 1-based line
/// number when one is known, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A value violates a domain invariant (dangling endpoint, negative rate...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class CapacityViolation : public Error {
 public:
  CapacityViolation(const std::string& what, std::size_t link) : Error(what), link_(link) {}
  std::size_t link() const { return link_; }

 private:
  std::size_t link_;
};

/// The instance has no admissible routing (e.g. a minimum rate cannot be met).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Instance too large for an exhaustive method.
class TractabilityError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incompatible binary content (checkpoints, datasets).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace neuroute
