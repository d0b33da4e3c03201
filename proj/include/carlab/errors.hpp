#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace carlab {

// Base class for everything thrown by the library. `code()` is a stable
// identifier the CLI maps onto exit codes and error reports.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// A scenario violates one of the admissibility inequalities of the method.
// `condition` names the inequality, e.g. "(1.9)" or "(5.1)", so that error
// messages always cite the condition that failed.
class ConditionViolation : public Error {
public:
    ConditionViolation(std::string condition, const std::string& what)
        : Error("ConditionViolation", what), condition_(std::move(condition)) {}

    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

// Constant computation asked for a regime where the defining inequality
// fails; carries the violated inequality tag like ConditionViolation.
class ParameterConflict : public Error {
public:
    ParameterConflict(std::string condition, const std::string& what)
        : Error("ParameterConflict", what), condition_(std::move(condition)) {}

    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

#define CARLAB_DEFINE_ERROR(NAME)                                            \
    class NAME : public Error {                                              \
    public:                                                                  \
        explicit NAME(const std::string& what) : Error(#NAME, what) {}       \
    }

CARLAB_DEFINE_ERROR(X0InsideDomain);
CARLAB_DEFINE_ERROR(TimeBelowCritical);
CARLAB_DEFINE_ERROR(NoValidExponent);
CARLAB_DEFINE_ERROR(OmegaOutsideExtension);
CARLAB_DEFINE_ERROR(KindMismatch);
CARLAB_DEFINE_ERROR(TimeOutOfRange);
CARLAB_DEFINE_ERROR(CFLViolation);
CARLAB_DEFINE_ERROR(UnstableSolution);
CARLAB_DEFINE_ERROR(LinearSolveFailure);
CARLAB_DEFINE_ERROR(NonzeroTrace);
CARLAB_DEFINE_ERROR(GridMismatch);
CARLAB_DEFINE_ERROR(EmptyGamma);
CARLAB_DEFINE_ERROR(ResidualTooLarge);
CARLAB_DEFINE_ERROR(BoundaryViolation);
CARLAB_DEFINE_ERROR(FitUnderdetermined);
CARLAB_DEFINE_ERROR(NoAdmissibleBeta);
CARLAB_DEFINE_ERROR(ConfigError);
CARLAB_DEFINE_ERROR(NumericalFailure);

#undef CARLAB_DEFINE_ERROR

}  // namespace carlab
