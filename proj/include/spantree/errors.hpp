#pragma once

#include <stdexcept>
#include <string>

namespace spantree {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SPANTREE_DEFINE_ERROR(Name)                                           \
    class Name : public Error {                                               \
    public:                                                                   \
        using Error::Error;                                                   \
    }

// Graph construction and lookup.
SPANTREE_DEFINE_ERROR(SelfLoopError);
SPANTREE_DEFINE_ERROR(DuplicateEdgeError);
SPANTREE_DEFINE_ERROR(NonPositiveWeightError);
SPANTREE_DEFINE_ERROR(NodeOutOfRangeError);
SPANTREE_DEFINE_ERROR(EdgeNotFoundError);
SPANTREE_DEFINE_ERROR(SameNodeError);
SPANTREE_DEFINE_ERROR(RootRequiredError);

// Structural preconditions.
SPANTREE_DEFINE_ERROR(DisconnectedError);
SPANTREE_DEFINE_ERROR(PreconditionViolatedError);
SPANTREE_DEFINE_ERROR(NonIntegerDegreeWeightsError);
SPANTREE_DEFINE_ERROR(CapExceededError);

// Numerical failures.
SPANTREE_DEFINE_ERROR(SingularMatrixError);
SPANTREE_DEFINE_ERROR(DimensionMismatchError);
SPANTREE_DEFINE_ERROR(IllConditionedInterpolationError);
SPANTREE_DEFINE_ERROR(NumericalFailureError);

// Input file problems (graph file parsing, CLI arguments).
SPANTREE_DEFINE_ERROR(ParseError);

#undef SPANTREE_DEFINE_ERROR

}  // namespace spantree
