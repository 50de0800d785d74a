#pragma once

#include <stdexcept>
#include <string>

namespace confreg {

// Bad arguments, malformed configuration or command lines.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Unreadable, inconsistent or malformed input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A computation produced a non-finite value. Messages carry the epoch,
// point or case that triggered it.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace confreg
