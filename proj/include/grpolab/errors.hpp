#pragma once

#include <stdexcept>
#include <string>

namespace grpolab {

// Validation failures: malformed specs, out-of-schema inputs.  CLI exit 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runtime rejections: enumeration caps, stability conditions, estimator
// preconditions.  CLI exit 3.
struct RejectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace grpolab
