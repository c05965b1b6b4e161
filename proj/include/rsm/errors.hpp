#pragma once

#include <stdexcept>
#include <string>

namespace rsm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownSymbolError : public Error {
public:
    using Error::Error;
};

class AmbiguousSymbolError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// An automaton or machine whose configuration cannot be executed (e.g. a rule popping
/// more symbols than the stack holds).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

class PopUnderflowError : public Error {
public:
    using Error::Error;
};

/// The inner pop/push loop of a stack machine did not terminate within its guard.
class RunawayLoopError : public Error {
public:
    using Error::Error;
};

class SamplingExhaustedError : public Error {
public:
    using Error::Error;
};

class ZeroVarianceError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace rsm
