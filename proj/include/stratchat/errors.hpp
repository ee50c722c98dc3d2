#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stratchat {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(std::string key)
        : Error("not found: " + key), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class IngestionError : public Error {
public:
    using Error::Error;
};

// Malformed store line. line() is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Provider output that could not be parsed into the expected structure.
class MalformedOutputError : public Error {
public:
    MalformedOutputError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw_payload() const { return raw_; }

private:
    std::string raw_;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts)
        : Error(what), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

class ProviderError : public Error {
public:
    ProviderError(int status, const std::string& body)
        : Error("provider rejected request with status " + std::to_string(status)),
          status_(status), body_(body) {}
    int status() const { return status_; }
    const std::string& body() const { return body_; }

private:
    int status_;
    std::string body_;
};

class EmptyResponseError : public Error {
public:
    using Error::Error;
};

// One violated rule of a strategy decision.
struct Violation {
    enum class Rule { Shape, UnknownTag, DirectionMismatch, DuplicateTag };
    Rule rule;
    std::string detail;
};

std::string to_string(Violation::Rule rule);

class StrategyValidationError : public Error {
public:
    explicit StrategyValidationError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

class EmptyAnnotationError : public Error {
public:
    using Error::Error;
};

// A metric whose formula has no defined value on the given input
// (empty golden set, zero moderator tokens, no consistent pairs, ...).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class PairingError : public Error {
public:
    using Error::Error;
};

class SessionError : public Error {
public:
    using Error::Error;
};

}  // namespace stratchat
