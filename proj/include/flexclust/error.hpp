#pragma once

#include <stdexcept>
#include <string>

namespace flexclust {

/// Process exit status for each error family.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    data = 3,
    invariant = 4,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Malformed text in an input record (bad timestamp, unparsable number).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Record parsed but violates a domain invariant (e.g. negative power).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Record has the wrong shape (column count, header).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ExitCode::data, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ExitCode::data, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

/// A caller broke an operation's precondition.
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& what) : Error(ExitCode::invariant, what) {}
};

/// An internal invariant failed to hold (a bug, not bad input).
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& what) : Error(ExitCode::invariant, what) {}
};

} // namespace flexclust
