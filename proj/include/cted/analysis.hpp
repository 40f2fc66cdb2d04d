#pragma once

#include <string>
#include <vector>

#include "cted/discrete.hpp"
#include "cted/orchestrate.hpp"
#include "cted/trajectory.hpp"

namespace cted {

/// Maximal span where |continuous price - discrete LMP| exceeds the
/// tolerance, with the signed difference restricted to it.
struct PriceDiffSpan {
    double t_lo = 0.0;
    double t_hi = 0.0;
    PiecewisePolynomial difference; // lambda_ct(t) - lambda_dt(t) on [t_lo, t_hi]
};

struct PriceDifferenceResult {
    std::vector<PriceDiffSpan> spans;
    PiecewisePolynomial full_difference; // over the whole horizon
};

/// Difference defined as continuous-time price minus the discrete LMP.
PriceDifferenceResult price_difference(const PiecewiseTrajectory& ct, const LmpStepFunction& dt,
                                       double price_tol = 1e-6);

/// Per-unit settlement discrepancy over one span:
/// integral of (lambda_ct - lambda_dt) * x_k(t) dt, minutes converted to
/// hours. Positive = excess revenue under continuous pricing.
struct RevenueEntry {
    double t_lo = 0.0;
    double t_hi = 0.0;
    std::vector<double> per_unit; // dollars
    double total = 0.0;
};

std::vector<RevenueEntry> revenue_discrepancy(const PriceDifferenceResult& diff,
                                              const PiecewiseTrajectory& gen);

struct SubgradientCheckResult {
    double predicted = 0.0;      // lambda(tau) * bump * width / 60, dollars
    double actual = 0.0;         // re-solved cost difference, dollars
    double relative_error = 0.0;
    double lambda_at_tau = 0.0;  // $/MWh
    double base_cost = 0.0;
    double perturbed_cost = 0.0;
};

/// Price-as-subgradient test: perturb the load by a parabolic bump of mean
/// height `bump` supported on [tau, tau + width], re-solve the full pipeline
/// (both runs share the window edges as forced endpoints so the methodology
/// noise cancels), and compare the cost change against lambda * deltaD * dt.
/// The window must lie strictly inside one segment of `base`.
SubgradientCheckResult subgradient_check(const System& sys, const FinalSolution& base,
                                         double tau, double bump = 0.1, double width = 0.05,
                                         const SolveConfig& config = {});

/// Plot-ready comparison CSV: t, lambda_ct, lambda_dt, diff.
std::string comparison_csv(const PiecewiseTrajectory& ct, const LmpStepFunction& dt,
                           double sample_step);

} // namespace cted
