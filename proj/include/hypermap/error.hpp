#pragma once

#include <stdexcept>
#include <string>

namespace hypermap {

/// Base class for every error raised by the pipeline.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

/// File-level failures. The cube reader distinguishes three of them.
class IoError : public Error {
public:
    using Error::Error;
};

class HeaderError : public IoError {
public:
    using IoError::IoError;
};

class TruncatedError : public IoError {
public:
    using IoError::IoError;
};

class WavelengthOrderError : public IoError {
public:
    using IoError::IoError;
};

} // namespace hypermap
