#pragma once

#include <stdexcept>
#include <string>

namespace testfee {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A distribution literal or constructor argument violates the CDF invariants.
class InvalidDistribution : public Error {
public:
    using Error::Error;
};

class ZeroMassBelow : public Error {
public:
    using Error::Error;
};

class DomainMismatch : public Error {
public:
    using Error::Error;
};

class NoThreshold : public Error {
public:
    using Error::Error;
};

class NotAThreshold : public Error {
public:
    using Error::Error;
};

/// Arguments outside the domain of a closed form (e.g. a degenerate prior).
class DomainError : public Error {
public:
    using Error::Error;
};

class InvalidParams : public Error {
public:
    using Error::Error;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

class EpsTooLarge : public Error {
public:
    using Error::Error;
};

class NotNearFullSurplus : public Error {
public:
    using Error::Error;
};

} // namespace testfee
