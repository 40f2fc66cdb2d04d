#pragma once

#include <stdexcept>
#include <string>
#include <Eigen/Core>

namespace cted {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (bad syntax, missing keys, wrong types).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A domain invariant does not hold; the message names the offending field.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Evaluation requested outside the load horizon [S, T].
class OutOfHorizon : public Error {
public:
    using Error::Error;
};

/// LP has no feasible point. Carries a Farkas-style certificate:
///   A_eq' eq_ray + A_ie' ie_ray = 0,  ie_ray >= 0,
///   b_eq' eq_ray + b_ie' ie_ray < 0.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& msg, Eigen::VectorXd eq_ray, Eigen::VectorXd ie_ray)
        : Error(msg), eq_ray(std::move(eq_ray)), ie_ray(std::move(ie_ray)) {}
    explicit InfeasibleError(const std::string& msg) : Error(msg) {}
    Eigen::VectorXd eq_ray;
    Eigen::VectorXd ie_ray;
};

/// LP objective decreases without bound along `ray`:
///   A_eq ray = 0, A_ie ray <= 0, f' ray < 0.
class UnboundedError : public Error {
public:
    UnboundedError(const std::string& msg, Eigen::VectorXd ray)
        : Error(msg), ray(std::move(ray)) {}
    Eigen::VectorXd ray;
};

/// Conditioning beyond recovery or internal iteration caps exceeded.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// Active-set KKT system stayed singular after the drop/perturb policy.
class DegenerateRegion : public Error {
public:
    using Error::Error;
};

/// Parameter point infeasible for the parametric LP.
class InfeasiblePoint : public Error {
public:
    using Error::Error;
};

/// Critical-region count exceeded the configured cap.
class ExplorationOverflow : public Error {
public:
    using Error::Error;
};

/// theta(t) leaves every feasible critical region: the continuous-time
/// dispatch problem is deemed infeasible.
class InfeasibleDispatch : public Error {
public:
    using Error::Error;
};

class RootIsolationFailure : public Error {
public:
    using Error::Error;
};

/// Trajectory endpoints and dispatch endpoints disagree.
class EndpointSetMismatch : public Error {
public:
    using Error::Error;
};

/// Subgradient window [tau, tau+width] straddles a segment endpoint.
class WindowCrossesEndpoint : public Error {
public:
    using Error::Error;
};

/// Iteration cap reached; carries a dump of the loop state.
class MaxIterationsExceeded : public Error {
public:
    MaxIterationsExceeded(const std::string& msg, std::string state_dump)
        : Error(msg), state_dump(std::move(state_dump)) {}
    std::string state_dump;
};

} // namespace cted
