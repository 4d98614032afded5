#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isarah {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's contract (wrong dimension, out-of-range sample id).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// The operation does not exist for this kind of problem (e.g. exact gradients of an
/// expectation-form objective).
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// A schedule or bound needs a problem constant that was not supplied.
class MissingConstant : public Error {
 public:
  explicit MissingConstant(std::string name)
      : Error("missing constant: " + name), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Raised when a multi-loop schedule does not contract (alpha >= 1).
class ScheduleInvalid : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace isarah
