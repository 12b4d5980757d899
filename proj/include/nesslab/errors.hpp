#pragma once

#include <stdexcept>
#include <string>

namespace nesslab {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A state that violates Hermiticity, normalization or positivity beyond tolerance.
class InvalidState : public Error {
public:
    using Error::Error;
};

/// Adaptive integrator could not take a step larger than its floor.
class StiffnessError : public Error {
public:
    StiffnessError(const std::string& what, double t, double dt)
        : Error(what), time(t), step(dt) {}
    double time;
    double step;
};

/// Steady-state iteration hit its time budget before the residual dropped below tolerance.
class TimeoutError : public Error {
public:
    TimeoutError(const std::string& what, double residual)
        : Error(what), last_residual(residual) {}
    double last_residual;
};

class NonUniqueSteadyState : public Error {
public:
    NonUniqueSteadyState(const std::string& what, int mult)
        : Error(what), multiplicity(mult) {}
    int multiplicity;
};

/// Problem is too large for the dense code path.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Linear dynamics have no stable fixed point. `indicator` is zeta or the
/// rightmost characteristic root, whichever the caller computed.
class InstabilityError : public Error {
public:
    InstabilityError(const std::string& what, double ind)
        : Error(what), indicator(ind) {}
    double indicator;
};

}  // namespace nesslab
