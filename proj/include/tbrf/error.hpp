#pragma once

#include <stdexcept>
#include <string>

namespace tbrf {

// Each class maps to a distinct process exit code in the command-line tool.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File missing, unreadable, truncated, corrupt or of the wrong version.
class IoError : public Error {
public:
    using Error::Error;
};

// Input violates a documented precondition (bad CSV field, bad parameter).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A numerical routine could not produce a trustworthy answer.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace tbrf
