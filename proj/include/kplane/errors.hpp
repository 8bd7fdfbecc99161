#pragma once

#include <stdexcept>
#include <string>

namespace kplane {

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Anchor simplex too close to degenerate for Cramer ratios.
struct SingularAnchorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Declared decay is too weak for the requested integral to converge.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structurally inconsistent input (e.g. non-nested layer-cake slices).
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptySliceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IterationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace kplane
