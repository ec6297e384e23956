#pragma once

#include <stdexcept>
#include <string>

namespace icicle {

/// Shape or width disagreement between operands.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration value or violated config invariant.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file on disk. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

/// Caller broke an operation's contract (e.g. non-scalar loss, length mismatch).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerically degenerate input (zero row, zero column, near-zero vector).
class DegenerateInputError : public std::runtime_error {
public:
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Value outside an operation's mathematical domain.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An operation produced NaN/Inf; training cannot continue.
class TrainingDivergence : public std::runtime_error {
public:
    explicit TrainingDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace icicle
