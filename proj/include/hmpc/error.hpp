#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hmpc {

enum class ErrorCode {
    DimensionMismatch,
    NonFinite,
    SingularLoop,
    SingularSteadyMap,
    IllConditionedHessian,
    GridTooSmall,
    InvalidGrid,
    RankDeficient,
    NotPositiveDefinite,
    ProtocolError,
    SteadyMapBroken,
    InvalidHandover,
    InvalidConfig,
    TransportError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::SingularLoop: return "SingularLoop";
        case ErrorCode::SingularSteadyMap: return "SingularSteadyMap";
        case ErrorCode::IllConditionedHessian: return "IllConditionedHessian";
        case ErrorCode::GridTooSmall: return "GridTooSmall";
        case ErrorCode::InvalidGrid: return "InvalidGrid";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::ProtocolError: return "ProtocolError";
        case ErrorCode::SteadyMapBroken: return "SteadyMapBroken";
        case ErrorCode::InvalidHandover: return "InvalidHandover";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::TransportError: return "TransportError";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace hmpc
