#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace langfam {

enum class ErrorCode {
    DuplicateLanguage,
    MultipleReferenceLanguages,
    UnknownFeature,
    UnknownLanguage,
    MalformedRecord,
    InvalidConfig,
    ProviderUnavailable,
    DimensionMismatch,
    NonFiniteValue,
    PartialFailure,
    CacheMismatch,
    EmptyInput,
    ZeroVector,
    ReferenceLanguageMissing,
    DegenerateInput,
    InvalidK,
    RangeTooNarrow,
    SingleCluster,
    NoHighResourceLanguages,
    MissingSeed,
    EmptyCandidates,
    ValidationFailed,
    IoFailure,
    UnknownFormat,
    InvariantViolation,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DuplicateLanguage: return "DuplicateLanguage";
        case ErrorCode::MultipleReferenceLanguages: return "MultipleReferenceLanguages";
        case ErrorCode::UnknownFeature: return "UnknownFeature";
        case ErrorCode::UnknownLanguage: return "UnknownLanguage";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::PartialFailure: return "PartialFailure";
        case ErrorCode::CacheMismatch: return "CacheMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::ReferenceLanguageMissing: return "ReferenceLanguageMissing";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::InvalidK: return "InvalidK";
        case ErrorCode::RangeTooNarrow: return "RangeTooNarrow";
        case ErrorCode::SingleCluster: return "SingleCluster";
        case ErrorCode::NoHighResourceLanguages: return "NoHighResourceLanguages";
        case ErrorCode::MissingSeed: return "MissingSeed";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::ValidationFailed: return "ValidationFailed";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::UnknownFormat: return "UnknownFormat";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
    }
    return "Unknown";
}

/// Base exception for every failure raised by the library. The code is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised when some embedding requests failed after retries while others
/// succeeded. `failed()` lists the affected sample ids.
class PartialFailureError : public Error {
public:
    PartialFailureError(std::vector<std::string> failed, const std::string& message)
        : Error(ErrorCode::PartialFailure, message), failed_(std::move(failed)) {}

    [[nodiscard]] const std::vector<std::string>& failed() const noexcept { return failed_; }

private:
    std::vector<std::string> failed_;
};

}  // namespace langfam
