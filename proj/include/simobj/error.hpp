#pragma once

#include <stdexcept>

namespace simobj {

// Data-shape problems: malformed records, broken invariants in input data.
// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad parameters or configuration: out-of-range values, missing rows,
// unusable option combinations. The CLI maps these to exit code 3.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace simobj
