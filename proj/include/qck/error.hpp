#pragma once

#include <stdexcept>
#include <string>

namespace qck {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input could not be parsed (malformed JSON, bad magic bytes, truncated file).
class FormatError : public Error {
public:
    using Error::Error;
};

// Input parsed but violates a data invariant (point out of bounds, size mismatch).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// NaN/Inf encountered during a numerical computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Filesystem failure (unreadable input, unwritable output).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qck
