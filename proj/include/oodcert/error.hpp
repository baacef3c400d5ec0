#pragma once

#include <stdexcept>
#include <string>

namespace oodcert {

// Base of every error raised by the library. `kind()` is the short machine
// tag the CLI prints on its error line.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// A caller passed an argument outside an operation's domain.
class ArgumentError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "argument"; }
};

// Input violates a domain invariant (non-SPD covariance, degenerate
// calibration, ...).
class ValidationError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

// A file does not follow its interchange format. The message names the field.
class FormatError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

class IoError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

// Should be unreachable; signals a broken numerical invariant.
class InternalError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "internal"; }
};

} // namespace oodcert
