#pragma once

#include <stdexcept>
#include <string>

namespace inca {

enum class Errc {
    DimensionMismatch,
    DuplicateClass,
    EmptyInput,
    NoClasses,
    NumericalFailure,
    BackendUnavailable,
    TokenLimitExceeded,
    IoFailure,
    SchemaMismatch,
    IntegrityFailure,
    ParseFailure,
    InvalidArgument,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::DimensionMismatch:  return "DimensionMismatch";
        case Errc::DuplicateClass:     return "DuplicateClass";
        case Errc::EmptyInput:         return "EmptyInput";
        case Errc::NoClasses:          return "NoClasses";
        case Errc::NumericalFailure:   return "NumericalFailure";
        case Errc::BackendUnavailable: return "BackendUnavailable";
        case Errc::TokenLimitExceeded: return "TokenLimitExceeded";
        case Errc::IoFailure:          return "IoFailure";
        case Errc::SchemaMismatch:     return "SchemaMismatch";
        case Errc::IntegrityFailure:   return "IntegrityFailure";
        case Errc::ParseFailure:       return "ParseFailure";
        case Errc::InvalidArgument:    return "InvalidArgument";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace inca
