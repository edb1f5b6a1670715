#pragma once

#include <stdexcept>

namespace echometrics {

// Raised for bad input: malformed files, violated preconditions, unknown
// labels. The CLI maps it to exit code 1; anything else is an internal error.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace echometrics
