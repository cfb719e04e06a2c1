#pragma once

#include <stdexcept>
#include <string>

namespace scamp {

/// Invalid parameters or inconsistent dimensions. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quantity left its valid numerical range (non-PD covariance, failed quadrature).
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN or Inf appeared in an AMP iterate.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, int iteration)
        : NumericalError(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

} // namespace scamp
