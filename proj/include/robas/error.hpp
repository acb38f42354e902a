#pragma once

#include <stdexcept>
#include <string>

namespace robas {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad dimensions, empty inputs, or an invalid configuration value.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DegenerateData : public Error {
public:
    DegenerateData() : Error("degenerate data") {}
};

// A quantity that is nonnegative by construction came out clearly negative,
// or an algebraic identity failed to hold.
class InternalConsistency : public Error {
public:
    using Error::Error;
};

// A loss or gradient evaluated to NaN/Inf during optimization.
class NonFinite : public Error {
public:
    using Error::Error;
};

class SolverFailure : public Error {
public:
    using Error::Error;
};

// Malformed input file (CSV or JSON syntax).
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace robas
