#pragma once

#include <stdexcept>
#include <string>

namespace layertime {

// Bad input: violated preconditions, malformed files, unknown names.
// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative fit ran out of iterations without meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trace container problems: bad magic, checksum or shape mismatch, I/O.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace layertime
