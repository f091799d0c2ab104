#pragma once

#include <stdexcept>
#include <string>

namespace spikeassoc {

// Bad configuration, bad arguments, shape mismatches. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Instance cannot satisfy the per-TX capacity constraint. CLI exit code 3.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O and format problems, including malformed JSON. CLI exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace spikeassoc
