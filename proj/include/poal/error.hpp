#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poal {

// Malformed input text. Carries the 1-based line number when one applies.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Invalid experiment or component configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// An API called outside its precondition (re-querying an index, shape mismatch, ...).
class UsageError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Non-finite values or failed factorizations.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace poal
