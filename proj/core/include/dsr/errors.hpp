#pragma once

#include <stdexcept>
#include <string>

namespace dsr {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem or I/O failure (unreadable file, write failure, missing artifact).
class StorageError : public Error {
public:
    using Error::Error;
};

/// Malformed input that should have followed a known format. Messages carry
/// the offending location (line number, row index) when one exists.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Persisted data that parses but violates repository invariants
/// (duplicate ids, wrong db_id, derived fields stored).
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// A precondition or cross-component contract was violated
/// (dimension mismatch, non-unit vector, un-indexed repository).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Network-level failure talking to an embedding or generation endpoint,
/// after retries are exhausted.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Invalid or incomplete configuration, including a missing prior
/// pipeline stage.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Lookup of an id that does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Model output that does not contain the expected "refers to" form.
/// Carries the raw output for inspection.
class UnparseableOutputError : public Error {
public:
    UnparseableOutputError(const std::string& message, std::string raw)
        : Error(message), raw_(std::move(raw)) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// A structured statement with an empty text part or an empty SQL part.
class MalformedStatementError : public Error {
public:
    using Error::Error;
};

/// Model output that is empty or contains no SQL at all.
class EmptyGenerationError : public Error {
public:
    using Error::Error;
};

/// A failure inside a tuning sweep; the message names the candidate value.
class TuningError : public Error {
public:
    using Error::Error;
};

} // namespace dsr
