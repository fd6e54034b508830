#pragma once

#include <stdexcept>
#include <string>

namespace dalight {

// Structural violations: mismatched extents, invalid axes, bad arguments.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// An operation produced or received a non-finite value.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration: unknown variant, out-of-range bucket, ...
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class IoErrorKind {
    missing_file,
    bad_magic,
    bad_version,
    truncated,
    dimension_overflow,
    name_mismatch,
    write_failed,
};

class IoError : public std::runtime_error {
public:
    IoError(IoErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    IoErrorKind kind() const { return kind_; }

private:
    IoErrorKind kind_;
};

}  // namespace dalight
