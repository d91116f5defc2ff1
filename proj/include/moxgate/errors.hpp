#pragma once

#include <stdexcept>
#include <string>

namespace moxgate {

// Shape mismatches between tensors or configured dimensions.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// An argument value outside its documented domain (e.g. dropout rate >= 1).
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (ragged rows, duplicate IDs, empty data region).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid data that violates a pipeline precondition
// (fully-missing feature, empty feature intersection, class too small to split).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent configuration (unknown keys, indivisible head counts).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace moxgate
