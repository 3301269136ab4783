#ifndef TREEAMP_ERRORS_HPP
#define TREEAMP_ERRORS_HPP

#include <any>
#include <stdexcept>
#include <string>

namespace treeamp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TREEAMP_ERROR(Name)                                   \
    class Name : public Error {                              \
    public:                                                  \
        explicit Name(const std::string &what) : Error(what) {} \
    };

TREEAMP_ERROR(NonPositivePrecision)
TREEAMP_ERROR(EmptyInterval)
TREEAMP_ERROR(DomainError)
TREEAMP_ERROR(ShapeMismatch)
TREEAMP_ERROR(CycleDetected)
TREEAMP_ERROR(Disconnected)
TREEAMP_ERROR(UnknownFactorKind)
TREEAMP_ERROR(DuplicateVariable)
TREEAMP_ERROR(NegativePosteriorPrecision)
TREEAMP_ERROR(NumericalFailure)
TREEAMP_ERROR(QuadratureFailure)
TREEAMP_ERROR(DivergentTilt)
TREEAMP_ERROR(NonPositiveTilt)
TREEAMP_ERROR(SingularPrecision)
TREEAMP_ERROR(UnsamplableFactor)
TREEAMP_ERROR(NonPositiveEffectivePrecision)
TREEAMP_ERROR(ConfigError)

#undef TREEAMP_ERROR

// Thrown by the checked runners; `result` holds the partial EPResult or
// SEState.
class NotConverged : public Error {
public:
    NotConverged(const std::string &what, std::any result)
        : Error(what), result(std::move(result)) {}
    std::any result;
};

} // namespace treeamp

#endif
