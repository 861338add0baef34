#pragma once

#include <stdexcept>
#include <string>

namespace tneda {

/// Broad failure categories; the CLI maps each one to a distinct exit code.
enum class ErrorCategory { Usage = 2, Io = 3, Parse = 4, Domain = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Input text that does not follow its file format.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(ErrorCategory::Parse, what) {}
};

/// Arguments outside an operation's domain (bad dimensions, probabilities, empty data...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorCategory::Domain, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

} // namespace detail
} // namespace tneda
