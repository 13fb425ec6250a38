#pragma once

#include <stdexcept>
#include <string>

namespace mempol {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of inputs disagree (e.g. a policy with the wrong number of rows).
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A kernel, policy or file fails its stochasticity or shape constraints.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The stationary space of a transition matrix has dimension greater than one.
class NonUniqueStationary : public Error {
public:
    using Error::Error;
};

/// A combinatorial or enumeration limit was exceeded.
class GuardExceeded : public Error {
public:
    using Error::Error;
};

/// Training parameters blew up past the divergence threshold.
class Divergence : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// A scalar argument is outside its admissible range.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace mempol
