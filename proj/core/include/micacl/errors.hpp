#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace micacl {

// Dimension/axis violations (mismatched matmul shapes, axis out of range, ...).
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid model/run configuration (bad scale set, head divisibility, unknown key, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric preconditions and runtime failures (non-scalar backward, consumed tape,
// degenerate embeddings, non-finite loss/gradient).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// On-disk format violations. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::uint64_t offset)
        : std::runtime_error(msg + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace micacl
