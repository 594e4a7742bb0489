#pragma once

#include <stdexcept>
#include <string>

namespace kia {

// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid experiment / model / dataset configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The model variant cannot perform the requested operation (e.g. backward
// powers of a forward-only KAE operator).
class UnsupportedOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Non-finite value where a finite one was required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch, std::string component)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                             ": non-finite " + component),
          epoch_(epoch), component_(std::move(component)) {}

    int epoch() const noexcept { return epoch_; }
    const std::string& component() const noexcept { return component_; }

private:
    int epoch_;
    std::string component_;
};

// Failure while reading a dataset, grid or checkpoint file.
class LoadError : public std::runtime_error {
public:
    enum class Kind { Io, Header, Version, Shape, Truncated };

    LoadError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace kia
