#pragma once

#include <stdexcept>
#include <string>

namespace east {

// Invalid or inconsistent configuration (divisibility, escape checks, bad keys).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File problems; message carries the byte offset where parsing failed.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated an operation precondition.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// The prefix-only frame guard recorded a read past the observation boundary.
struct LeakageError : std::runtime_error {
    explicit LeakageError(const std::string& msg) : std::runtime_error(msg) {}
};

// A checkpoint disagrees with the dataset or requested configuration.
struct MismatchError : std::runtime_error {
    explicit MismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace east
