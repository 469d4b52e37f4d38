#pragma once

#include <stdexcept>
#include <string>

#include "stefan/format.hpp"

namespace stefan {

enum class ErrorKind {
  invalid_input,  // precondition or schema violation
  numerical,      // solver fatal: CFL violation, front exit, blow-up
  io,
};

/// Base for every error raised by the toolkit. The kind selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error(ErrorKind::invalid_input, what) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

/// Time step above the explicit stability limit. Carries the limit that was computed.
class StabilityViolation : public NumericalFailure {
 public:
  StabilityViolation(double dt, double limit)
      : NumericalFailure("time step " + format_real(dt) + " exceeds stability limit " +
                         format_real(limit)),
        dt_(dt),
        limit_(limit) {}
  double dt() const noexcept { return dt_; }
  double limit() const noexcept { return limit_; }

 private:
  double dt_;
  double limit_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace stefan
