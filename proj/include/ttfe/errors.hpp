#pragma once

#include <stdexcept>
#include <string>

namespace ttfe {

/// Malformed input, missing files, or values that violate a type invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The numerical stage could not produce a result (singular system,
/// iteration budget exhausted).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ttfe
