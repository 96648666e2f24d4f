#pragma once

#include <stdexcept>
#include <string>

namespace idla {

// Quadrature / series evaluation failed to reach the requested accuracy.
class NumericError : public std::runtime_error {
  public:
    NumericError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_estimate(achieved) {}
    double achieved_estimate;
};

// A computation would exceed a configured memory budget.
class ResourceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace idla
