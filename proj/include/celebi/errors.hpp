#pragma once

#include <stdexcept>
#include <string>

namespace celebi {

// Invalid shapes or out-of-range arguments to tensor/world/metric operations.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss or parameter detected during training (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Frozen-weight checksum mismatch or broken hand-off invariant.
struct ProtocolError : std::logic_error {
    using std::logic_error::logic_error;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace celebi
