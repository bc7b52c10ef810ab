#pragma once

#include <stdexcept>

namespace bsdelab {

// Numeric failure surfaced by solvers/experiments (non-finite intermediate,
// fixed point that refuses to converge, ...). CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration; CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bsdelab
