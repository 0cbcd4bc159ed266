#pragma once

#include <stdexcept>
#include <string>

namespace elite {

/// Raised when an input violates a documented precondition (bad shapes,
/// out-of-range arguments, invalid configuration).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Shape mismatch between tensors, checkpoints, or patch batches.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative numerics that failed to reach the requested tolerance.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API used out of order (e.g. backward without a recorded forward).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class FormatErrc {
    malformed_header,
    truncated_payload,
    version_mismatch,
    trailing_data,
    io_failure,
};

inline const char* to_string(FormatErrc code) {
    switch (code) {
    case FormatErrc::malformed_header: return "malformed header";
    case FormatErrc::truncated_payload: return "truncated payload";
    case FormatErrc::version_mismatch: return "version mismatch";
    case FormatErrc::trailing_data: return "trailing data";
    case FormatErrc::io_failure: return "i/o failure";
    }
    return "unknown";
}

/// File-format error. The code distinguishes the failure class so callers
/// (and tests) can tell a bad header from a short payload.
class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    FormatErrc code() const noexcept { return code_; }

private:
    FormatErrc code_;
};

/// Patch set that does not tile its target exactly.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace elite
