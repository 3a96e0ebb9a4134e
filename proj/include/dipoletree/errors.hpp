#pragma once

#include <stdexcept>
#include <string>

namespace dipoletree {

// Bad input data or schema (CLI exit code 3).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Solver breakdown, NaN inputs, non-PSD covariance (CLI exit code 4).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// No right-comparable pair at a node; the caller makes the node terminal.
struct LabelingError : std::runtime_error {
    explicit LabelingError(const std::string& what) : std::runtime_error(what) {}
};

// All dipole weights vanished; nothing to separate at this node.
struct DegenerateSplitError : std::runtime_error {
    explicit DegenerateSplitError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dipoletree
