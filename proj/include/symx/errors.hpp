#pragma once

#include <stdexcept>
#include <string>

namespace symx {

// Error taxonomy. Each class carries a stable process exit code so the CLI
// can translate failures uniformly; library code throws, tools catch at the
// top level.
class Error : public std::runtime_error {
public:
    Error(std::string msg, int code) : std::runtime_error(std::move(msg)), code_(code) {}
    int exit_code() const noexcept { return code_; }

private:
    int code_;
};

// Bad arguments, malformed config, inconsistent shapes, invalid option values.
class ValidationError : public Error {
public:
    explicit ValidationError(std::string msg) : Error(std::move(msg), 2) {}
};

// Mathematically undefined evaluation (negative base with fractional power,
// division by zero introduced by a negative exponent at zero, ...).
class DomainError : public Error {
public:
    explicit DomainError(std::string msg) : Error(std::move(msg), 3) {}
};

// A finite computation produced NaN or infinity.
class NonFiniteError : public Error {
public:
    explicit NonFiniteError(std::string msg) : Error(std::move(msg), 4) {}
};

// Unreadable expression text or malformed CSV.
class ParseError : public Error {
public:
    explicit ParseError(std::string msg) : Error(std::move(msg), 5) {}
};

// Training failed to converge on every fold.
class DivergedError : public Error {
public:
    explicit DivergedError(std::string msg) : Error(std::move(msg), 6) {}
};

// Filesystem failures: missing file, unwritable path, short read.
class IoError : public Error {
public:
    explicit IoError(std::string msg) : Error(std::move(msg), 7) {}
};

// A file parsed as JSON but does not match the expected document layout.
class SchemaError : public Error {
public:
    explicit SchemaError(std::string msg) : Error(std::move(msg), 8) {}
};

}  // namespace symx
