#pragma once

#include <stdexcept>
#include <string>

namespace weakline {

// Base class for all weakline errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scenario / request rejected before any computation ran.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Stereographic coordinate requested at the south pole (theta = pi).
class PoleError : public Error {
public:
    using Error::Error;
};

// Fock truncation too small for an operator monomial.
class TruncationError : public Error {
public:
    using Error::Error;
};

// Dropped coherent-state tail weight above the truncation budget.
class TailError : public Error {
public:
    using Error::Error;
};

// Boundary kind has no normalizable state in this engine.
class UnsupportedBoundary : public Error {
public:
    using Error::Error;
};

// Postselection exactly orthogonal to the evolved preselection.
class OrthogonalPostselection : public Error {
public:
    using Error::Error;
};

// Source-profile bin boundary does not sit on a time-step boundary.
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Generating functional crossed zero between the two log evaluations.
class LogBranchError : public Error {
public:
    using Error::Error;
};

// Adaptive integrator could not meet its local tolerance.
class StepFailure : public Error {
public:
    using Error::Error;
};

// Newton shooting failed on every start; carries the best residual seen.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& msg, double best_residual)
        : Error(msg), best_residual(best_residual) {}
    double best_residual;
};

// Amplitude factor divergent (|dq''/dp'| below threshold).
class CausticError : public Error {
public:
    using Error::Error;
};

// Postselected pointer state vanished identically.
class ZeroNorm : public Error {
public:
    using Error::Error;
};

}  // namespace weakline
