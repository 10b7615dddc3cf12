#pragma once

#include <stdexcept>
#include <string>

namespace pcw {

enum class ErrorKind {
    InvalidArgument,
    OutOfDomain,
    NoGuidedMode,
    CalibrationFailure,
    NonConvergence,
    DegenerateInput,
    Ordering,
    DivisionByZero,
    InsufficientData,
    RankDeficient,
    NoCrossing,
    Absence,
    Parse,
    Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message)
{
    if (!condition)
        throw Error(kind, message);
}

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::NoGuidedMode: return "no-guided-mode";
    case ErrorKind::CalibrationFailure: return "calibration-failure";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::DegenerateInput: return "degenerate-input";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::DivisionByZero: return "division-by-zero";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::NoCrossing: return "no-crossing";
    case ErrorKind::Absence: return "absence";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace pcw
