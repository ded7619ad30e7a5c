#pragma once

#include <stdexcept>
#include <string>

namespace cvarlq {

enum class ErrorKind {
    DimensionMismatch,
    NotPositiveDefinite,
    BadHorizon,
    RNotIdentity,
    NoFeasibleGamma,
    InnerMatrixNotPD,
    CertificateFailed,
    ConditioningFailure,
    CycleLimitExceeded,
    TooLarge,
    Unsupported,
    TreeTooLarge,
    NonFiniteCost,
    BadAlpha,
    EmptySample,
    InvalidArgument,
    ParseError,
};

/// Exception type shared by all modules. The kind is stable and intended
/// for programmatic handling; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace cvarlq
