#pragma once

#include <stdexcept>
#include <string>

namespace lexihal {

enum class ErrorKind {
    EmptyInput,
    InvalidArgument,
    ProviderUnavailable,
    NoScriptMatch,
    ParseError,
    DuplicateStatute,
    EmptyStore,
    Unparseable,
    FallbackParseError,
    MissingField,
    ScoreParseError,
    OutOfRangeScore,
    TokenOutOfRange,
    InvalidLogProb,
    DivergenceDetected,
    RevisionFailed,
    ValidationFailed,
    AllQuestionsFiltered,
    IoError,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Thrown by HTTP providers after exhausting retries; keeps the attempt count
// so callers can report how hard we tried.
class ProviderError : public Error {
public:
    ProviderError(const std::string& message, int attempts)
        : Error(ErrorKind::ProviderUnavailable,
                message + " (after " + std::to_string(attempts) + " attempts)"),
          attempts_(attempts) {}

    int attempts() const { return attempts_; }

private:
    int attempts_;
};

}  // namespace lexihal
