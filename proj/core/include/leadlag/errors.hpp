#pragma once

#include <stdexcept>
#include <string>

namespace leadlag {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad configuration or parameters (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit code 3).
struct DataError : Error {
    using Error::Error;
};

/// Numerical failure inside a solver (CLI exit code 4).
struct SolverError : Error {
    using Error::Error;
};

// panel
struct MissingCellError : DataError {
    using DataError::DataError;
};
struct DuplicateCellError : DataError {
    using DataError::DataError;
};
struct NonNumericValueError : DataError {
    using DataError::DataError;
};
struct WindowTooShortError : ConfigError {
    using ConfigError::ConfigError;
};
struct UnknownViewError : ConfigError {
    using ConfigError::ConfigError;
};

// proxops
struct NonFiniteInputError : DataError {
    using DataError::DataError;
};
struct AsymmetricInputError : DataError {
    using DataError::DataError;
};
struct NonOrthonormalStartError : DataError {
    using DataError::DataError;
};

// solvers
struct DivergedError : SolverError {
    using SolverError::SolverError;
};
struct SingularSystemError : SolverError {
    using SolverError::SolverError;
};

// shaker
struct SpectralBlowupError : SolverError {
    using SolverError::SolverError;
};

// evalkit
struct ZeroDenominatorError : DataError {
    using DataError::DataError;
};
struct LengthMismatchError : DataError {
    using DataError::DataError;
};
struct InsufficientEntitiesError : ConfigError {
    using ConfigError::ConfigError;
};

// synth
struct InvalidDimensionsError : ConfigError {
    using ConfigError::ConfigError;
};
struct ShapeMismatchError : DataError {
    using DataError::DataError;
};

} // namespace leadlag
