#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace share {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller-supplied values was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Point configuration admits no unique similarity alignment.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file-exchange peer did not answer within the configured wait.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace share
