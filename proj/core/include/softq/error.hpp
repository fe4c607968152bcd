#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace softq {

// Base of every error raised by the library. The CLI maps the subclasses
// below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or record. `line` is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Structurally valid input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Query text that does not conform to the DSL grammar.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// An enumeration (oracle or cycle enumeration) would exceed its budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace softq
