#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lipreach {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. Line and column are 1-based.
class ParseError : public Error {
public:
  ParseError(const std::string& message, int line, int column)
      : Error(message + " at line " + std::to_string(line) + ", column " +
              std::to_string(column)),
        line_(line), column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

private:
  int line_;
  int column_;
};

/// Expression evaluated outside its domain (x/0, sqrt(-1), ...) or with an
/// out-of-range variable index.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Invalid model, controller or configuration.
class ModelError : public Error {
public:
  using Error::Error;
};

/// Simulation left the finite range; carries the time of failure.
class DivergenceError : public Error {
public:
  explicit DivergenceError(double time)
      : Error("state diverged at t=" + std::to_string(time)), time_(time) {}

  double time() const noexcept { return time_; }

private:
  double time_;
};

}  // namespace lipreach
