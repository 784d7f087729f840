#pragma once

#include <stdexcept>
#include <string>

namespace sketchlab {

/// Thrown when a numerical routine cannot produce a trustworthy result
/// (non-convergence, singular normal equations, loss blow-up). Carries the
/// last computed value so callers can inspect how far the routine got.
class NumericFailure : public std::runtime_error {
public:
    NumericFailure(const std::string& what, double last_value)
        : std::runtime_error(what), last_value_(last_value) {}

    double last_value() const noexcept { return last_value_; }

private:
    double last_value_ = 0.0;
};

/// Configuration-level error (unknown key, type mismatch, missing file).
/// Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sketchlab
