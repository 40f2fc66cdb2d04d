#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cted/model.hpp"
#include "cted/trajectory.hpp"
#include "cted/verify.hpp"

namespace cted {

struct SolveConfig {
    double mismatch_tol = 0.001;  // MW, endpoint convergence criterion
    double price_tol = 1e-6;      // $/MWh
    double root_grid_step = 0.01; // minutes
    int max_iterations = 200;
    int region_cap = 10000;
    double lp_feas_tol = 1e-8;
    double locate_tol = 1e-8;
    unsigned seed = 12345;                // degeneracy-perturbation reproducibility
    std::vector<double> forced_endpoints; // inserted at initialization
    bool log_iterations = false;          // stream one line per iteration to stderr

    void validate() const;
    LpOptions lp_options() const;
    MplpOptions mplp_options() const;
    TraceOptions trace_options() const;
};

struct IterationRecord {
    int iteration = 0;
    std::vector<std::pair<double, double>> ranges;
    std::vector<double> new_endpoints;
    double max_mismatch = 0.0;
    int ramp_violations = 0;
    int price_inconsistencies = 0;
    int segment_count = 0;
};

/// Loop state: the endpoint set only ever grows; updating ranges are disjoint
/// subranges of [S, T] whose boundary dispatch comes from the latest adaptive
/// solve.
struct IterationState {
    int iteration = 0;
    std::vector<double> endpoints;
    Eigen::MatrixXd boundary_dispatch; // units x endpoints
    std::vector<std::pair<double, double>> updating_ranges;
    std::vector<TrajectorySegment> segments;
    std::vector<IterationRecord> log;
};

/// Hourly-style initialization: endpoints {S, T} (plus any forced instants),
/// boundary dispatch from the adaptive model, one updating range covering
/// the whole period. Throws InfeasibleError when even the endpoint dispatch
/// has no solution.
IterationState initialize(const System& sys, const SolveConfig& config);

struct FinalSolution {
    PiecewiseTrajectory trajectory;
    std::vector<double> endpoints; // full verification endpoint set
    AdaptiveDispatchResult final_dispatch;
    VerificationReport final_report;
    std::vector<IterationRecord> iteration_log;
    int iterations = 0;
    double total_cost = 0.0; // dollars, exact integral of the final trajectory
};

/// The iterative methodology: alternate trajectory construction over the
/// updating ranges with global verification until the convergence criterion
/// holds. Throws InfeasibleDispatch or MaxIterationsExceeded (with a state
/// dump attached).
FinalSolution run(const System& sys, const SolveConfig& config = {});

} // namespace cted
