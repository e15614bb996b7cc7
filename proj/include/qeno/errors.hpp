#pragma once

#include <stdexcept>
#include <string>

namespace qeno {

// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError -> 2, DataError (and subclasses) -> 3, NumericError -> 4.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/rank/axis violations in tensor ops.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Violated call contracts (non-scalar loss, bad qubit index, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Bad configuration: unknown keys, unparsable values, invalid combinations.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// File and dataset problems.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Distinct classes for binary-format failures so tests and callers can
// tell them apart.
struct MagicError : DataError {
    explicit MagicError(const std::string& msg) : DataError(msg) {}
};
struct VersionError : DataError {
    explicit VersionError(const std::string& msg) : DataError(msg) {}
};
struct ShapeHeaderError : DataError {
    explicit ShapeHeaderError(const std::string& msg) : DataError(msg) {}
};
struct TruncationError : DataError {
    explicit TruncationError(const std::string& msg) : DataError(msg) {}
};
struct ChecksumError : DataError {
    explicit ChecksumError(const std::string& msg) : DataError(msg) {}
};

// Non-finite values encountered during training.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace qeno
