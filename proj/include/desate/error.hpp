#pragma once

#include <stdexcept>
#include <string>

namespace desate {

// Root of the library's exception hierarchy. The CLI maps the concrete
// categories onto its exit codes (config -> 2, data -> 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or hyperparameter.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data is missing, malformed, or violates a series invariant.
class DataError : public Error {
public:
    using Error::Error;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

// Training produced a non-finite loss.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace desate
