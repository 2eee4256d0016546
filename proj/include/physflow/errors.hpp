#ifndef PHYSFLOW_ERRORS_HPP
#define PHYSFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace physflow {

/// Input failed a precondition. `field()` names the offending parameter.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Argument outside the mathematical domain of a function (e.g. density > kj).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Data-dependent failure: too few records, every interval rejected, gaps, ...
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer-chain extents do not compose.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Feature variant cannot be built for the requested source/target layout.
class UnsupportedVariant : public std::runtime_error {
public:
    UnsupportedVariant(std::string context, const std::string& what)
        : std::runtime_error(what + " [" + context + "]"), context_(std::move(context)) {}
    const std::string& context() const noexcept { return context_; }

private:
    std::string context_;
};

/// Numerical scheme left its admissible state space.
class SimulationError : public std::runtime_error {
public:
    SimulationError(long step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

} // namespace physflow

#endif
