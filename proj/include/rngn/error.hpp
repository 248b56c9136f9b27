#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rngn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data (CSV, checkpoint, chain contents).
class DataError : public Error {
public:
    using Error::Error;
};

/// A checkpoint names a model type this build does not know.
class UnsupportedModelError : public DataError {
public:
    using DataError::DataError;
};

/// Overflow or another non-finite intermediate in a numerical routine.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The optimizer produced a non-finite objective.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t iteration)
        : Error(what), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

} // namespace rngn
