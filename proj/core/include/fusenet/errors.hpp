#pragma once

#include <stdexcept>
#include <string>

namespace fusenet {

/// Shape or extent mismatch between operands.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (bad hyperparameter, impossible layer stack, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent on-disk data (manifests, blobs, checkpoints).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An operation produced a non-finite value.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training produced non-finite values, or the evaluation leakage trap fired.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The evaluation protocol was about to mix held-out data into training.
/// Always a hard failure, never downgraded to an annotated fold.
class LeakageError : public DivergenceError {
public:
    explicit LeakageError(const std::string& msg) : DivergenceError(msg) {}
};

} // namespace fusenet
