#pragma once

#include <stdexcept>
#include <string>

namespace mobilectl {

enum class ErrorKind {
    InvalidArgument,
    Nonconvergence,
    InfeasibleDecomposition,
    StageInfeasible,
    ControlInfeasible,
    LiftingInfeasible,
    BallViolation,
    Config,
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    bool is_synthesis_failure() const noexcept {
        switch (kind_) {
            case ErrorKind::InfeasibleDecomposition:
            case ErrorKind::StageInfeasible:
            case ErrorKind::ControlInfeasible:
            case ErrorKind::LiftingInfeasible:
            case ErrorKind::BallViolation:
            case ErrorKind::Nonconvergence:
                return true;
            default:
                return false;
        }
    }

private:
    ErrorKind kind_;
};

/// Newton (and Picard fallback) failure inside one implicit step.
class NonconvergenceError : public Error {
public:
    NonconvergenceError(const std::string& what, double residual, double time)
        : Error(ErrorKind::Nonconvergence, what), residual_(residual), time_(time) {}

    double residual() const noexcept { return residual_; }
    double time() const noexcept { return time_; }

private:
    double residual_;
    double time_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) {
    throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace mobilectl
