#pragma once

#include <stdexcept>
#include <string>

namespace protoid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A precondition on input data does not hold (empty recording, bad index, ...).
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace protoid
