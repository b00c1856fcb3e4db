#pragma once

#include <stdexcept>
#include <string>

namespace ahofm {

/// Bad arguments, malformed inputs or inconsistent shapes.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: singular systems, divergence, infeasible targets.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model file problems: unreadable, wrong schema version, checksum mismatch.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw InvalidArgument(msg);
}

} // namespace detail
} // namespace ahofm
