#pragma once

#include <stdexcept>
#include <string>

namespace losssim
{

/// Precondition or parameter-range violation by the caller.
class InvalidArgument : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A series, quadrature or Laplace inversion did not reach its tolerance.
/// Raised instead of returning a silently truncated value.
class ConvergenceFailure : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Configuration document rejected during validation. `field()` is a JSON
/// pointer to the offending entry.
class ConfigError : public std::runtime_error
{
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field))
    {
    }

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition)
    {
        throw InvalidArgument(message);
    }
}

} // namespace losssim
