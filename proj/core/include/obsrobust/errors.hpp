#pragma once

#include <stdexcept>
#include <string>

namespace obsrobust {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid inputs: malformed files, bad identifiers, inconsistent models.
struct ModelError : Error {
    using Error::Error;
};

/// Numeric or feasibility failures encountered during analysis.
struct NumericError : Error {
    using Error::Error;
};

struct SyntaxError : ModelError {
    SyntaxError(int line, int col, const std::string& expected)
        : ModelError("syntax error at line " + std::to_string(line) + ", column " +
                     std::to_string(col) + ": expected " + expected),
          line(line), col(col), expected(expected) {}
    int line;
    int col;
    std::string expected;
};

struct SemanticError : ModelError {
    using ModelError::ModelError;
};

struct UnknownBenchmark : ModelError {
    using ModelError::ModelError;
};

struct DuplicateEdge : ModelError {
    using ModelError::ModelError;
};

struct IndexMismatch : ModelError {
    using ModelError::ModelError;
};

struct ImpossibleObservation : ModelError {
    using ModelError::ModelError;
};

/// A (node, observation) pair with positive probability but no memory update.
struct UndefinedMemoryUpdate : ModelError {
    using ModelError::ModelError;
};

struct UnsupportedPolynomial : ModelError {
    using ModelError::ModelError;
};

struct InvalidQuery : ModelError {
    using ModelError::ModelError;
};

struct NonContractive : NumericError {
    using NumericError::NumericError;
};

struct EmptyInterval : NumericError {
    using NumericError::NumericError;
};

struct InfeasibleRow : NumericError {
    using NumericError::NumericError;
};

struct InvalidDistribution : NumericError {
    using NumericError::NumericError;
};

/// Region refinement ran out of budget before closing the gap.
struct Inconclusive : NumericError {
    using NumericError::NumericError;
};

struct TooLarge : NumericError {
    using NumericError::NumericError;
};

struct DivisionByZero : NumericError {
    using NumericError::NumericError;
};

struct PreconditionViolated : NumericError {
    using NumericError::NumericError;
};

}  // namespace obsrobust
