#pragma once

#include <stdexcept>
#include <string>

namespace ccs {

// Raised when a model map returns (or is handed) a vector/matrix whose shape
// disagrees with the declared subsystem dimensions. The message names the map.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a linear solve required by the theory is singular or nearly so
// (reciprocal condition below threshold), or when row reduction leaves a
// non-square system.
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ccs
