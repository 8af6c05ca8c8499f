#pragma once

#include <stdexcept>
#include <string>

namespace qaforge {

// Bad configuration: invalid rule patterns, malformed endpoint URLs, bad flags.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input data that violates a schema or an invariant.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace qaforge
