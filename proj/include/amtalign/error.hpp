#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amtalign {

/// Malformed binary or text input. Carries the byte offset (SMF) or field
/// name (activation container) where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}
    FormatError(const std::string& what, std::string field)
        : std::runtime_error(what + " (field '" + field + "')"), field_(std::move(field)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t offset_ = 0;
    std::string field_;
};

/// A value fell outside the range its type admits (pitch, activation value).
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Incompatible or invalid configuration (grid mismatch, infeasible band).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Precondition on an argument violated (empty matrix, too few pieces).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be opened, read or written. The message names the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace amtalign
