#pragma once

#include <stdexcept>
#include <string>

namespace gibbs {

/// A Monte Carlo or quadrature estimator could not produce a trustworthy
/// value (non-convergence, truncation bound too loose, diverging energy).
struct EstimatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A property the theory guarantees was violated beyond its tolerance.
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gibbs
