#pragma once

#include <stdexcept>
#include <string>

namespace kalpha {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable input, malformed CSV, bad spec files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The data carry no information for the requested quantity
/// (no variation, every resample degenerate, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace kalpha
