#ifndef LFI_ERRORS_HPP
#define LFI_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lfi {

// Argument outside its mathematical domain (y outside (0,1), sigma <= 0, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Vector/matrix dimensions do not agree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Inconsistent or invalid configuration.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-finite value produced mid-computation.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Simulator failed to produce a finite output; carries the offending input.
struct SimulationError : std::runtime_error {
    std::vector<double> theta;
    SimulationError(const std::string& msg, std::vector<double> t)
        : std::runtime_error(msg), theta(std::move(t)) {}
};

} // namespace lfi

#endif
