#pragma once

#include <stdexcept>
#include <string>

namespace expertgen {

// Base for all errors raised by this library. Each subclass carries a short
// machine-parseable code used by the CLI for one-line error reporting.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error("parse", message) {}
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& message) : Error("integrity", message) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

class ConfigurationError : public Error {
public:
    explicit ConfigurationError(const std::string& message) : Error("config", message) {}
};

// Violated call contract (precondition) rather than bad user data.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& message) : Error("contract", message) {}
};

class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& message) : Error("provider", message) {}
};

class TopicParseError : public Error {
public:
    explicit TopicParseError(const std::string& message) : Error("topic_parse", message) {}
};

// A pipeline stage was run before the stage that produces its input.
class DependencyError : public Error {
public:
    explicit DependencyError(const std::string& message) : Error("dependency", message) {}
};

}  // namespace expertgen
