#pragma once

#include <stdexcept>
#include <string>

namespace promptcache {

/// Malformed input data: bad files, dimension mismatches, unknown ids.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite or degenerate value.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid caller-supplied configuration.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NotImplementedError : public UsageError {
public:
    using UsageError::UsageError;
};

}  // namespace promptcache
