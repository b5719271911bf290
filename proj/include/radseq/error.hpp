#pragma once

#include <stdexcept>
#include <string>

namespace radseq {

/// Caller violated an argument, configuration, or format contract.
/// The CLI maps this family to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Tensor shapes or layer extents are inconsistent.
class DimensionError : public ValidationError {
public:
    explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

/// I/O or malformed-data failure (unreadable file, bad header, truncation).
/// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace radseq
