#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epshqs {

// Dimension/length mismatch between tensors, batches or vectors.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Value outside the admissible domain (out-of-box sample, bad label, bad t).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Invalid configuration or violated construction invariant.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A finite pool cannot supply the requested number of samples.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Column count differs from what the design space expects.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Non-finite loss during optimisation; carries the optimiser step.
struct TrainingError : std::runtime_error {
    TrainingError(long step, const std::string& what)
        : std::runtime_error("training step " + std::to_string(step) + ": " + what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

}  // namespace epshqs
