#pragma once

#include <stdexcept>

namespace pact {

// Solver failures that the CLI maps to dedicated exit codes.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The participation constraint cannot be met under the wage bounds.
struct InfeasibleError : SolverError {
    using SolverError::SolverError;
};

// Iteration budget exhausted; the message carries the best residuals seen.
struct MaxIterationsError : SolverError {
    using SolverError::SolverError;
};

}  // namespace pact
