#include "cted/orchestrate.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "cted/errors.hpp"
#include "cted/numfmt.hpp"

namespace cted {

using Eigen::Index;
using Eigen::VectorXd;

void SolveConfig::validate() const {
    if (!(mismatch_tol > 0)) throw ValidationError("config: mismatch_tol must be > 0");
    if (!(price_tol > 0)) throw ValidationError("config: price_tol must be > 0");
    if (!(root_grid_step > 0)) throw ValidationError("config: root_grid_step must be > 0");
    if (max_iterations <= 0) throw ValidationError("config: max_iterations must be > 0");
    if (region_cap <= 0) throw ValidationError("config: region_cap must be > 0");
    if (!(lp_feas_tol > 0)) throw ValidationError("config: lp_feas_tol must be > 0");
    if (!(locate_tol > 0)) throw ValidationError("config: locate_tol must be > 0");
}

LpOptions SolveConfig::lp_options() const {
    LpOptions opt;
    opt.feas_tol = lp_feas_tol;
    return opt;
}

MplpOptions SolveConfig::mplp_options() const {
    MplpOptions opt;
    opt.lp = lp_options();
    opt.contain_tol = locate_tol;
    opt.max_regions = region_cap;
    opt.seed = seed;
    return opt;
}

TraceOptions SolveConfig::trace_options() const {
    TraceOptions opt;
    opt.grid_step = root_grid_step;
    return opt;
}

namespace {

constexpr double kEndpointDedupTol = 1e-6; // minutes

std::vector<double> initial_endpoints(const System& sys, const SolveConfig& config) {
    std::vector<double> e{sys.load.start(), sys.load.end()};
    for (double f : config.forced_endpoints) {
        if (f <= sys.load.start() + kEndpointDedupTol || f >= sys.load.end() - kEndpointDedupTol)
            continue;
        e.push_back(f);
    }
    std::sort(e.begin(), e.end());
    std::vector<double> out;
    for (double v : e)
        if (out.empty() || v - out.back() > kEndpointDedupTol) out.push_back(v);
    out.back() = sys.load.end();
    return out;
}

std::size_t endpoint_index(const std::vector<double>& endpoints, double t) {
    for (std::size_t i = 0; i < endpoints.size(); ++i)
        if (std::abs(endpoints[i] - t) <= kEndpointDedupTol) return i;
    throw NumericalFailure("internal: endpoint " + format_number(t) + " not in the set");
}

// Replace everything inside [a, b] with the freshly traced segments,
// splitting any straddling segment at the range boundary.
std::vector<TrajectorySegment> splice_segments(const std::vector<TrajectorySegment>& old_segs,
                                               double a, double b,
                                               std::vector<TrajectorySegment> fresh) {
    std::vector<TrajectorySegment> out;
    for (const auto& s : old_segs) {
        if (s.t_end <= a + 1e-12) {
            out.push_back(s);
        } else if (s.t_start < a - 1e-12) {
            TrajectorySegment head = s;
            head.t_end = a;
            out.push_back(std::move(head));
        }
    }
    for (auto& s : fresh) out.push_back(std::move(s));
    for (const auto& s : old_segs) {
        if (s.t_start >= b - 1e-12) {
            out.push_back(s);
        } else if (s.t_end > b + 1e-12) {
            TrajectorySegment tail = s;
            tail.t_start = b;
            out.push_back(std::move(tail));
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.t_start < y.t_start;
    });
    return out;
}

// Merge adjacent pieces carrying the same affine maps (splice artifacts).
std::vector<TrajectorySegment> merge_equal_segments(std::vector<TrajectorySegment> segs) {
    std::vector<TrajectorySegment> out;
    for (auto& s : segs) {
        if (!out.empty()) {
            auto& p = out.back();
            bool same = p.region_index == s.region_index &&
                        std::abs(p.t_end - s.t_start) <= 1e-12 * (1.0 + std::abs(s.t_start)) &&
                        (p.a_t - s.a_t).cwiseAbs().maxCoeff() <= 1e-12 &&
                        (p.a_D - s.a_D).cwiseAbs().maxCoeff() <= 1e-12 &&
                        (p.b - s.b).cwiseAbs().maxCoeff() <= 1e-10 &&
                        std::abs(p.p_b - s.p_b) <= 1e-10 && std::abs(p.p_t - s.p_t) <= 1e-12 &&
                        std::abs(p.p_D - s.p_D) <= 1e-12;
            if (same) {
                p.t_end = s.t_end;
                continue;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> unit_ids(const System& sys) {
    std::vector<std::string> ids;
    for (const Unit& u : sys.units) ids.push_back(u.id);
    return ids;
}

} // namespace

IterationState initialize(const System& sys, const SolveConfig& config) {
    config.validate();
    IterationState st;
    st.endpoints = initial_endpoints(sys, config);
    AdaptiveDispatchResult hourly = adaptive_dispatch(sys, st.endpoints, config.lp_options());
    st.boundary_dispatch = hourly.dispatch;
    st.updating_ranges = {{sys.load.start(), sys.load.end()}};
    return st;
}

FinalSolution run(const System& sys, const SolveConfig& config) {
    IterationState st = initialize(sys, config);
    const std::vector<std::string> ids = unit_ids(sys);

    for (st.iteration = 1; st.iteration <= config.max_iterations; ++st.iteration) {
        // Trajectory construction over each updating range. Boundary values
        // within the range come from the adaptive model, so each interval
        // between consecutive endpoints carries its own parametric model
        // pinned at both ends; secant ramp anchors then tighten as endpoints
        // accumulate.
        for (const auto& [a, b] : st.updating_ranges) {
            std::vector<TrajectorySegment> fresh;
            std::size_t ia = endpoint_index(st.endpoints, a);
            std::size_t ib = endpoint_index(st.endpoints, b);
            for (std::size_t i = ia; i < ib; ++i) {
                UpdatingRange range;
                range.s_u = st.endpoints[i];
                range.t_u = st.endpoints[i + 1];
                range.boundary_start = st.boundary_dispatch.col(static_cast<Index>(i));
                range.boundary_end = st.boundary_dispatch.col(static_cast<Index>(i + 1));
                ParametricLP plp = assemble_parametric_model(sys, range);
                RegionBank bank(plp, config.mplp_options());
                TraceResult traced = trace(sys, range, bank, config.trace_options());
                for (auto& s : traced.segments) fresh.push_back(std::move(s));
            }
            st.segments = splice_segments(st.segments, a, b, std::move(fresh));
        }
        st.segments = merge_equal_segments(std::move(st.segments));

        PiecewiseTrajectory traj(st.segments, sys.load, ids);

        // Verification endpoints: everything seen so far plus the fresh
        // segment boundaries (the endpoint set never shrinks).
        std::vector<double> grown = st.endpoints;
        for (double e : traj.endpoints()) {
            bool dup = false;
            for (double x : grown)
                if (std::abs(x - e) <= kEndpointDedupTol) {
                    dup = true;
                    break;
                }
            if (!dup) grown.push_back(e);
        }
        std::sort(grown.begin(), grown.end());
        st.endpoints = std::move(grown);

        AdaptiveDispatchResult dispatch;
        try {
            dispatch = adaptive_dispatch(sys, st.endpoints, config.lp_options());
        } catch (const InfeasibleError& e) {
            throw InfeasibleDispatch(std::string("adaptive dispatch infeasible: ") + e.what());
        }

        VerificationReport report = verify_all(traj, sys, dispatch, config.mismatch_tol,
                                               config.price_tol, config.root_grid_step);

        IterationRecord rec;
        rec.iteration = st.iteration;
        rec.ranges = st.updating_ranges;
        rec.new_endpoints = report.new_endpoints;
        rec.max_mismatch = report.max_mismatch;
        rec.ramp_violations = static_cast<int>(report.ramp_violations.size());
        rec.price_inconsistencies = static_cast<int>(report.price_inconsistencies.size());
        rec.segment_count = static_cast<int>(st.segments.size());
        st.log.push_back(rec);
        if (config.log_iterations) {
            std::cerr << "iter " << st.iteration << ": ranges";
            for (const auto& [a, b] : st.updating_ranges)
                std::cerr << " [" << format_number(a) << ", " << format_number(b) << "]";
            std::cerr << ", +" << report.new_endpoints.size() << " endpoints, max mismatch "
                      << format_number(report.max_mismatch) << " MW, " << rec.ramp_violations
                      << " ramp, " << rec.price_inconsistencies << " price" << std::endl;
        }

        if (report.converged) {
            FinalSolution fin{std::move(traj),
                              st.endpoints,
                              std::move(dispatch),
                              std::move(report),
                              st.log,
                              st.iteration,
                              0.0};
            fin.total_cost = fin.trajectory.total_cost(sys.cost_vector());
            return fin;
        }

        // Grow the endpoint set with the proposals, then refresh every
        // boundary value from the adaptive model on the full set.
        std::vector<double> with_new = st.endpoints;
        for (double p : report.new_endpoints) {
            if (p <= st.endpoints.front() + kEndpointDedupTol ||
                p >= st.endpoints.back() - kEndpointDedupTol)
                continue;
            bool dup = false;
            for (double x : with_new)
                if (std::abs(x - p) <= kEndpointDedupTol) {
                    dup = true;
                    break;
                }
            if (!dup) with_new.push_back(p);
        }
        std::sort(with_new.begin(), with_new.end());
        st.endpoints = std::move(with_new);

        try {
            dispatch = adaptive_dispatch(sys, st.endpoints, config.lp_options());
        } catch (const InfeasibleError& e) {
            throw InfeasibleDispatch(std::string("adaptive dispatch infeasible: ") + e.what());
        }
        st.boundary_dispatch = dispatch.dispatch;

        // Violated endpoints: continuity failures plus everything newly
        // inserted; ramp/price instants mark their enclosing endpoints.
        std::vector<bool> violated(st.endpoints.size(), false);
        auto mark_instant = [&](double t) {
            for (std::size_t i = 0; i < st.endpoints.size(); ++i)
                if (std::abs(st.endpoints[i] - t) <= kEndpointDedupTol) {
                    violated[i] = true;
                    return;
                }
            auto it = std::upper_bound(st.endpoints.begin(), st.endpoints.end(), t);
            if (it != st.endpoints.begin() && it != st.endpoints.end()) {
                violated[static_cast<std::size_t>(it - st.endpoints.begin()) - 1] = true;
                violated[static_cast<std::size_t>(it - st.endpoints.begin())] = true;
            }
        };
        for (const auto& e : report.endpoint_mismatches)
            if (e.max_abs >= config.mismatch_tol) mark_instant(e.instant);
        for (double p : report.new_endpoints) mark_instant(p);
        for (const auto& v : report.ramp_violations) mark_instant(v.instant);
        for (const auto& p : report.price_inconsistencies) mark_instant(p.instant);

        // Contaminated intervals: both flanks of every violated endpoint;
        // maximal unions become the next updating ranges.
        std::vector<bool> contaminated(st.endpoints.size() - 1, false);
        for (std::size_t i = 0; i < st.endpoints.size(); ++i) {
            if (!violated[i]) continue;
            if (i > 0) contaminated[i - 1] = true;
            if (i + 1 < st.endpoints.size()) contaminated[i] = true;
        }
        st.updating_ranges.clear();
        for (std::size_t i = 0; i < contaminated.size();) {
            if (!contaminated[i]) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < contaminated.size() && contaminated[j]) ++j;
            st.updating_ranges.emplace_back(st.endpoints[i], st.endpoints[j]);
            i = j;
        }
        if (st.updating_ranges.empty())
            st.updating_ranges = {{sys.load.start(), sys.load.end()}};
    }

    std::ostringstream dump;
    dump << "{ \"endpoints\": [";
    for (std::size_t i = 0; i < st.endpoints.size(); ++i)
        dump << (i ? ", " : "") << format_number(st.endpoints[i]);
    dump << "], \"iterations\": " << config.max_iterations << ", \"history\": [";
    for (std::size_t i = 0; i < st.log.size(); ++i)
        dump << (i ? ", " : "") << format_number(st.log[i].max_mismatch);
    dump << "] }";
    throw MaxIterationsExceeded("iteration cap (" + std::to_string(config.max_iterations) +
                                    ") reached without convergence",
                                dump.str());
}

} // namespace cted
