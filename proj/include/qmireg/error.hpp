#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qmireg {

/// Input that violates an operation's preconditions (shapes, ranges, labels).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration value outside its allowed domain.
class InvalidConfig : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// API called in the wrong order, e.g. backward without a cached forward.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Operation not defined for the chosen configuration.
class Unsupported : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed file contents. `offset()` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

} // namespace qmireg
