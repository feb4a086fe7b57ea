#ifndef OSCID_ERRORS_HPP
#define OSCID_ERRORS_HPP

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace oscid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NonPositiveFrequency : public Error {
 public:
  using Error::Error;
};

class NotOrthogonal : public Error {
 public:
  using Error::Error;
};

class NegativeDiagonal : public Error {
 public:
  using Error::Error;
};

class NonPositiveQ : public Error {
 public:
  using Error::Error;
};

/// The dynamic stiffness matrix is numerically singular at the drive frequency.
/// Only reachable with exactly zero damping at exact resonance.
class SingularAtDrive : public Error {
 public:
  using Error::Error;
};

class StepTooLarge : public Error {
 public:
  using Error::Error;
};

class EmptyWindow : public Error {
 public:
  using Error::Error;
};

class NoPeak : public Error {
 public:
  using Error::Error;
};

class FitDiverged : public Error {
 public:
  using Error::Error;
};

class ZeroMaximum : public Error {
 public:
  using Error::Error;
};

class ZeroLabAmplitude : public Error {
 public:
  using Error::Error;
};

/// Objective evaluation threw; carries the parameter triple it was given.
class EvaluationFailed : public Error {
 public:
  EvaluationFailed(const std::string& what, std::array<double, 3> at)
      : Error(what), at_(at) {}
  const std::array<double, 3>& at() const { return at_; }

 private:
  std::array<double, 3> at_;
};

class UnitError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Line and column are 1-based; 0 means "not applicable".
class SchemaError : public Error {
 public:
  SchemaError(std::string file, std::size_t line, std::size_t column,
              const std::string& what)
      : Error(format(file, line, column, what)),
        file_(std::move(file)),
        line_(line),
        column_(column) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& file, std::size_t line,
                            std::size_t column, const std::string& what) {
    std::string out = file;
    if (line > 0) out += ":" + std::to_string(line);
    if (column > 0) out += ":" + std::to_string(column);
    return out + ": " + what;
  }

  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace oscid

#endif  // OSCID_ERRORS_HPP
