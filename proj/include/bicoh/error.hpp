#pragma once

#include <stdexcept>
#include <string>

namespace bicoh {

/// Input violates a documented precondition (bad parameters, bad config key, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File missing, unreadable or malformed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical integration left the divergence bound.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ValidationError(what);
}
} // namespace detail

} // namespace bicoh
