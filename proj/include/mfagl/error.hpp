#pragma once

#include <stdexcept>
#include <string>

namespace mfagl {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An id, date, or category is not known to the receiving structure.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Array dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An operation was called in a state it does not support.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A computation produced or detected a non-finite / undefined value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mfagl
