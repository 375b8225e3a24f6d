#pragma once

#include <stdexcept>
#include <string>

namespace curator {

/// Base of every error the engine raises. Callers that only need a message
/// can catch this; the subclasses let callers branch on failure category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: invalid boxes, dimension mismatches, empty text.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Mathematically undefined input, e.g. a zero-norm embedding.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Non-finite values produced during numeric work.
class NumericError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A backend could not be reached (connection failure, timeout, 5xx) after
/// exhausting its retry budget.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts)
        : Error(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// A backend answered but refused the request (4xx, empty caption, ...).
/// Never retried.
class ApplicationError : public Error {
public:
    using Error::Error;
};

/// A scripted mock was asked for a key its fixture does not contain.
class FixtureMissError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

/// An export was requested before any label exists.
class EmptyExportError : public Error {
public:
    using Error::Error;
};

/// Unknown or incompatible on-disk format version.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace curator
