#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace freemesh {

// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated (too few points, bad order, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Loss of numerical conditioning: flat-limit underflow, vanishing pivots.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed input data. `position` is a byte offset or a 1-based line number,
// depending on the source.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t position)
      : Error(what + " (at " + std::to_string(position) + ")"), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// A serialized tree written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace freemesh
