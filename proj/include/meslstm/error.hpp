#pragma once

#include <stdexcept>
#include <string>

namespace meslstm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A frame or partition is too small for the requested operation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// A split produced a partition that cannot hold the required rows.
class SizingError : public InsufficientDataError {
public:
    SizingError(std::string partition, const std::string& what)
        : InsufficientDataError(what), partition_(std::move(partition)) {}

    const std::string& partition() const noexcept { return partition_; }

private:
    std::string partition_;
};

/// Input outside the mathematical domain of an operation (e.g. non-positive
/// data for multiplicative seasonality).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller violated a precondition: shapes, configuration, ordering.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss. epoch() is 1-based; -1 when unknown.
class TrainingDivergenceError : public Error {
public:
    TrainingDivergenceError(int epoch, const std::string& what)
        : Error(what), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// Problems with an input data file: unknown country, missing column, parse
/// failure.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace meslstm
