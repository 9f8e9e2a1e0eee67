#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dofrac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset()` is the byte offset of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Argument outside the mathematical domain of an operation (pole, ÷0, bad order, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver (singular system, non-convergence, ...).
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace dofrac
