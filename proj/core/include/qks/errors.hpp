#pragma once

#include <stdexcept>
#include <string>

namespace qks {

/// Malformed or inconsistent inputs: bad files, shape mismatches, invalid
/// configs. Mapped to exit code 2 by the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical check failed: gradient mismatch, non-determinism, divergence.
/// Mapped to exit code 3 by the CLI.
class VerificationError : public std::runtime_error {
public:
    explicit VerificationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qks
