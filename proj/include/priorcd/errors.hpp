#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace priorcd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

/// Malformed input text (JSON, CSV, LLM response).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw = {})
        : Error(what), raw_(std::move(raw)) {}

    const std::string& raw_text() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// Failure talking to a remote chat-completion endpoint. Always retriable.
class TransportError : public Error {
public:
    using Error::Error;
    bool retriable() const noexcept { return true; }
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// Aggregates every violation found while validating a configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& p : items) {
            if (!out.empty()) out += "; ";
            out += p;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

}  // namespace priorcd
