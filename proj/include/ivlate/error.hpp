#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ivlate {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: unreadable file, missing column, malformed config. CLI exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class SchemaError : public InputError {
public:
    using InputError::InputError;
};

class ValidationError : public InputError {
public:
    ValidationError(const std::string& what, std::size_t row)
        : InputError(what + " (data row " + std::to_string(row) + ")"), row_(row) {}
    explicit ValidationError(const std::string& what) : InputError(what) {}

    /// Zero-based data row (header excluded); npos when not row-specific.
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_ = static_cast<std::size_t>(-1);
};

/// The data were well-formed but an estimand or diagnostic could not be computed. CLI exit code 1.
class EstimationError : public Error {
public:
    using Error::Error;
};

class SingularityError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

class DegenerateEstimandError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

class PreconditionError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

class UnreliableBootstrapError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

} // namespace ivlate
