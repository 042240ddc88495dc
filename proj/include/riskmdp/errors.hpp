#pragma once

#include <stdexcept>
#include <string>

namespace riskmdp {

// Error hierarchy. The CLI maps each family onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or inconsistent inputs (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or invalid input data (exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t row)
        : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ValidationError : public DataError {
public:
    using DataError::DataError;
};

/// Numerical failure: singular systems, non-stochastic matrices (exit code 4).
class NumericError : public Error {
public:
    using Error::Error;
};

class ModelError : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace riskmdp
