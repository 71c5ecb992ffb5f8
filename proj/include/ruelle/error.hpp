#pragma once

#include <stdexcept>
#include <string>

namespace ruelle {

/// Raised when an input violates a precondition of a ruelle operation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when exact enumeration would exceed the configured term cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace ruelle
