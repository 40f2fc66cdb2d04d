#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cted/lp.hpp"
#include "cted/model.hpp"
#include "cted/trajectory.hpp"

namespace cted {

/// Joint discrete-time dispatch over an arbitrary sorted endpoint set.
/// Interval n = [t_n, t_{n+1}] carries objective weight dt_n / 60 (dollars);
/// the last endpoint has weight zero. lmp(n) is the balance multiplier at
/// t_n normalized to $/MWh by its forward interval (the value at the final
/// endpoint reuses the last interval and is diagnostic only).
struct AdaptiveDispatchResult {
    std::vector<double> endpoints;
    Eigen::MatrixXd dispatch;  // units x endpoints
    Eigen::VectorXd lmp;       // $/MWh per endpoint
    Eigen::VectorXd raw_duals; // balance multipliers in objective units
    double objective = 0.0;    // dollars
    std::vector<int> basis;    // warm-start hint for a repeat solve
};

AdaptiveDispatchResult adaptive_dispatch(const System& sys, std::vector<double> endpoints,
                                         const LpOptions& opt = {},
                                         const std::vector<int>& hint = {});

struct ContinuityEntry {
    double instant = 0.0;
    Eigen::VectorXd delta_right; // x^D(t_n) - right-limit of the trajectory; empty at T
    Eigen::VectorXd delta_left;  // x^D(t_n) - left-limit of the trajectory; empty at S
    double max_abs = 0.0;
};

struct RampViolation {
    int unit = -1;
    double instant = 0.0;   // first instant of the violating subinterval
    double derivative = 0.0; // representative x'(t) inside the subinterval
    double bound = 0.0;      // +R_up or -R_down
};

struct PriceInconsistency {
    double instant = 0.0;
    double lambda = 0.0;
    double expected_cost = 0.0;     // marginal unit's cost; NaN when no candidate
    std::string marginal_unit;      // empty when no candidate
    std::string note;
};

struct SegmentPriceInfo {
    std::size_t segment = 0;
    std::string marginal_unit; // empty when none identified
    double marginal_cost = 0.0;
    bool price_constant = true;
};

struct VerificationReport {
    std::vector<ContinuityEntry> endpoint_mismatches;
    double max_mismatch = 0.0;
    std::vector<RampViolation> ramp_violations;
    std::vector<PriceInconsistency> price_inconsistencies;
    std::vector<SegmentPriceInfo> segment_prices;
    std::vector<double> new_endpoints; // sorted, deduplicated proposals
    bool converged = false;

    std::string to_table() const;
    std::string to_json() const;
};

/// Eq.-style endpoint continuity: Delta_n(t_n) and Delta_{n-1}(t_n) against
/// the adaptive dispatch values. The dispatch endpoints must contain every
/// trajectory endpoint (EndpointSetMismatch otherwise).
std::vector<ContinuityEntry> check_continuity(const PiecewiseTrajectory& traj,
                                              const AdaptiveDispatchResult& dispatch,
                                              double endpoint_match_tol = 1e-6);

struct RampCheckResult {
    std::vector<RampViolation> violations;
    std::vector<double> new_endpoints;
};

/// Differential ramp check on segment interiors: x_k'(t) = a_t + a_D D'(t)
/// must stay within [-R_down, R_up]; crossings found by root isolation.
RampCheckResult check_ramping(const PiecewiseTrajectory& traj, const System& sys,
                              double grid_step = 0.01, double tol = 1e-6);

struct PriceCheckResult {
    std::vector<PriceInconsistency> inconsistencies;
    std::vector<SegmentPriceInfo> segment_prices;
    std::vector<double> new_endpoints;
};

/// Marginal-unit consistency for an upward load perturbation: exclude units
/// with an active capacity row or an active up-blocking ramp row, then the
/// cheapest remaining unit must set the price.
PriceCheckResult check_price_consistency(const PiecewiseTrajectory& traj, const System& sys,
                                         double price_tol = 1e-6);

/// All three checks plus the convergence verdict and merged endpoint
/// proposals (deduplicated against the dispatch endpoints at 1e-6 min).
VerificationReport verify_all(const PiecewiseTrajectory& traj, const System& sys,
                              const AdaptiveDispatchResult& dispatch, double mismatch_tol,
                              double price_tol, double grid_step = 0.01);

} // namespace cted
