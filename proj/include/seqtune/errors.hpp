#pragma once

#include <stdexcept>
#include <string>

namespace seqtune {

// Configuration / input validation problems. CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape-incompatible tensor operands. Message names the op and both shapes.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runtime numerical failures (divergence, non-finite loss). Exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace seqtune
