#pragma once

#include <stdexcept>
#include <string>

namespace mpqp {

/// Broad failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
    Validation,  // malformed input, violated invariant
    Infeasible,  // no point satisfies the constraints
    Numeric,     // singular systems, divergence, cycling
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define MPQP_DEFINE_ERROR(Name, Kind)                                              \
    class Name : public Error {                                                    \
    public:                                                                        \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}  \
    };

MPQP_DEFINE_ERROR(ValidationError, Validation)
MPQP_DEFINE_ERROR(ParseError, Validation)
MPQP_DEFINE_ERROR(FingerprintMismatch, Validation)
MPQP_DEFINE_ERROR(OracleLimit, Validation)
MPQP_DEFINE_ERROR(Infeasible, Infeasible)
MPQP_DEFINE_ERROR(InfeasibleStart, Infeasible)
MPQP_DEFINE_ERROR(SingularKkt, Numeric)
MPQP_DEFINE_ERROR(DegenerateActiveSet, Numeric)
MPQP_DEFINE_ERROR(CycleDetected, Numeric)
MPQP_DEFINE_ERROR(RegionExhausted, Numeric)
MPQP_DEFINE_ERROR(NonFiniteLoss, Numeric)

#undef MPQP_DEFINE_ERROR

}  // namespace mpqp
