#pragma once

#include <stdexcept>
#include <string>

namespace airylab {

// Base class for all library errors so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments: mismatched meshes, out-of-domain points, malformed config.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Geometry that admits no feasible construction (e.g. sqrt(x)+sqrt(y) > lambda).
class InfeasibleGeometry : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

// Iterative routine ran out of budget; carries the best value reached.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& what, double best_value)
        : Error(what), best(best_value) {}
    double best;
};

// Rejection sampler exhausted its tries; carries the empirical acceptance rate.
class LowAcceptance : public Error {
public:
    LowAcceptance(const std::string& what, double rate_seen)
        : Error(what), rate(rate_seen) {}
    double rate;
};

// Numerical breakdown (quadrature, eigensolver, determinant).
class NumericFailure : public Error {
public:
    using Error::Error;
};

} // namespace airylab
