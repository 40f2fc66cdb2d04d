#include "cted/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cted/errors.hpp"
#include "cted/numfmt.hpp"

namespace cted {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

AdaptiveDispatchResult adaptive_dispatch(const System& sys, std::vector<double> endpoints,
                                         const LpOptions& opt, const std::vector<int>& hint) {
    const Index K = static_cast<Index>(sys.unit_count());
    const Index N1 = static_cast<Index>(endpoints.size()); // endpoint count
    if (N1 < 2) throw ValidationError("adaptive dispatch: need at least two endpoints");
    for (Index i = 0; i + 1 < N1; ++i)
        if (!(endpoints[static_cast<std::size_t>(i)] < endpoints[static_cast<std::size_t>(i + 1)]))
            throw ValidationError("adaptive dispatch: endpoints must strictly increase");
    const double htol = 1e-9 * (1.0 + std::abs(sys.load.end()));
    if (std::abs(endpoints.front() - sys.load.start()) > htol ||
        std::abs(endpoints.back() - sys.load.end()) > htol)
        throw ValidationError("adaptive dispatch: endpoints must include S and T");

    const Index n = K * N1;
    auto var = [K](Index k, Index t) { return t * K + k; };

    LinearProgram lp;
    lp.f = VectorXd::Zero(n);
    for (Index t = 0; t + 1 < N1; ++t) {
        double w = (endpoints[static_cast<std::size_t>(t + 1)] -
                    endpoints[static_cast<std::size_t>(t)]) /
                   60.0; // dollars
        for (Index k = 0; k < K; ++k)
            lp.f(var(k, t)) = sys.units[static_cast<std::size_t>(k)].marginal_cost * w;
    }

    lp.A_eq = MatrixXd::Zero(N1, n);
    lp.b_eq = VectorXd::Zero(N1);
    for (Index t = 0; t < N1; ++t) {
        for (Index k = 0; k < K; ++k) lp.A_eq(t, var(k, t)) = 1.0;
        lp.b_eq(t) = sys.load.eval(endpoints[static_cast<std::size_t>(t)]);
    }

    // Capacity rows first (single-nonzero rows seed the initial working set),
    // then the secant ramp rows between consecutive endpoints.
    const Index m_cap = 2 * n;
    const Index m_ramp = 2 * K * (N1 - 1);
    lp.A_ie = MatrixXd::Zero(m_cap + m_ramp, n);
    lp.b_ie = VectorXd::Zero(m_cap + m_ramp);
    Index row = 0;
    for (Index t = 0; t < N1; ++t) {
        for (Index k = 0; k < K; ++k) {
            const Unit& u = sys.units[static_cast<std::size_t>(k)];
            lp.A_ie(row, var(k, t)) = 1.0;
            lp.b_ie(row++) = u.g_max;
            lp.A_ie(row, var(k, t)) = -1.0;
            lp.b_ie(row++) = -u.g_min;
        }
    }
    for (Index t = 0; t + 1 < N1; ++t) {
        double dt = endpoints[static_cast<std::size_t>(t + 1)] -
                    endpoints[static_cast<std::size_t>(t)];
        for (Index k = 0; k < K; ++k) {
            const Unit& u = sys.units[static_cast<std::size_t>(k)];
            lp.A_ie(row, var(k, t + 1)) = 1.0;
            lp.A_ie(row, var(k, t)) = -1.0;
            lp.b_ie(row++) = u.ramp_up * dt;
            lp.A_ie(row, var(k, t + 1)) = -1.0;
            lp.A_ie(row, var(k, t)) = 1.0;
            lp.b_ie(row++) = u.ramp_down_mag * dt;
        }
    }

    LpSolution sol = solve_lp(lp, opt, hint);

    AdaptiveDispatchResult out;
    out.endpoints = std::move(endpoints);
    out.dispatch.resize(K, N1);
    for (Index t = 0; t < N1; ++t)
        for (Index k = 0; k < K; ++k) out.dispatch(k, t) = sol.x(var(k, t));
    out.raw_duals = sol.lambda;
    out.lmp.resize(N1);
    for (Index t = 0; t < N1; ++t) {
        Index it = std::min(t, N1 - 2); // final endpoint reuses the last interval
        double w = (out.endpoints[static_cast<std::size_t>(it + 1)] -
                    out.endpoints[static_cast<std::size_t>(it)]) /
                   60.0;
        out.lmp(t) = sol.lambda(t) / w;
    }
    out.objective = sol.objective;
    out.basis = sol.basis;
    return out;
}

std::vector<ContinuityEntry> check_continuity(const PiecewiseTrajectory& traj,
                                              const AdaptiveDispatchResult& dispatch,
                                              double endpoint_match_tol) {
    // Every trajectory endpoint must appear among the dispatch endpoints.
    for (double te : traj.endpoints()) {
        bool found = false;
        for (double de : dispatch.endpoints)
            if (std::abs(de - te) <= endpoint_match_tol) {
                found = true;
                break;
            }
        if (!found)
            throw EndpointSetMismatch("trajectory endpoint " + format_number(te) +
                                      " missing from dispatch endpoints");
    }
    const double lo = traj.start(), hi = traj.end();
    std::vector<ContinuityEntry> out;
    for (std::size_t i = 0; i < dispatch.endpoints.size(); ++i) {
        double e = dispatch.endpoints[i];
        if (e < lo - endpoint_match_tol || e > hi + endpoint_match_tol)
            throw EndpointSetMismatch("dispatch endpoint " + format_number(e) +
                                      " outside the trajectory span");
        ContinuityEntry entry;
        entry.instant = e;
        VectorXd xd = dispatch.dispatch.col(static_cast<Index>(i));
        if (e < hi - endpoint_match_tol) {
            entry.delta_right = xd - traj.gen_right(e);
            entry.max_abs = std::max(entry.max_abs, entry.delta_right.cwiseAbs().maxCoeff());
        }
        if (e > lo + endpoint_match_tol) {
            entry.delta_left = xd - traj.gen_left(e);
            entry.max_abs = std::max(entry.max_abs, entry.delta_left.cwiseAbs().maxCoeff());
        }
        out.push_back(std::move(entry));
    }
    return out;
}

namespace {

// Violating subintervals of g > 0 over [a, b]: partition at the sign-change
// roots, classify each cell at its midpoint.
struct ViolationSpan {
    double lo, hi, sample; // sample = value of g at the midpoint
};

std::vector<ViolationSpan> positive_spans(const PiecewisePolynomial& g, double a, double b,
                                          double grid_step, double tol) {
    RootScanOptions opt;
    opt.grid_step = grid_step;
    std::vector<double> cuts{a};
    for (double r : scan_sign_changes(g, a, b, opt).roots) cuts.push_back(r);
    cuts.push_back(b);
    std::vector<ViolationSpan> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        double v = g.eval(mid);
        if (v > tol) out.push_back({cuts[i], cuts[i + 1], v});
    }
    return out;
}

} // namespace

RampCheckResult check_ramping(const PiecewiseTrajectory& traj, const System& sys,
                              double grid_step, double tol) {
    RampCheckResult out;
    const auto& dD = traj.load().derivative_piecewise();
    for (const auto& seg : traj.segments()) {
        for (Index k = 0; k < seg.b.size(); ++k) {
            const Unit& u = sys.units[static_cast<std::size_t>(k)];
            PiecewisePolynomial deriv = dD.affine_compose(0.0, seg.a_D(k), seg.a_t(k));
            double vtol = tol * (1.0 + std::max(u.ramp_up, u.ramp_down_mag));

            PiecewisePolynomial over = deriv.affine_compose(0.0, 1.0, -u.ramp_up);
            // over(t) = x'(t) - R_up; under(t) = -x'(t) - R_down.
            for (const auto& span :
                 positive_spans(over, seg.t_start, seg.t_end, grid_step, vtol)) {
                out.violations.push_back({static_cast<int>(k), span.lo,
                                          span.sample + u.ramp_up, u.ramp_up});
                out.new_endpoints.push_back(span.lo);
            }
            PiecewisePolynomial under = deriv.affine_compose(0.0, -1.0, -u.ramp_down_mag);
            for (const auto& span :
                 positive_spans(under, seg.t_start, seg.t_end, grid_step, vtol)) {
                out.violations.push_back({static_cast<int>(k), span.lo,
                                          -(span.sample + u.ramp_down_mag), -u.ramp_down_mag});
                out.new_endpoints.push_back(span.lo);
            }
        }
    }
    std::sort(out.new_endpoints.begin(), out.new_endpoints.end());
    return out;
}

namespace {

bool row_active(const std::vector<int>& active_set, int unit, ParamRow kind) {
    return std::binary_search(active_set.begin(), active_set.end(),
                              param_row_index(unit, kind));
}

} // namespace

PriceCheckResult check_price_consistency(const PiecewiseTrajectory& traj, const System& sys,
                                         double price_tol) {
    PriceCheckResult out;
    const auto& D = traj.load().piecewise();
    for (std::size_t si = 0; si < traj.segments().size(); ++si) {
        const auto& seg = traj.segments()[si];
        std::vector<int> active = seg.active_set;
        std::sort(active.begin(), active.end());

        // Candidate marginal units for an upward load perturbation.
        int best = -1;
        for (std::size_t k = 0; k < sys.unit_count(); ++k) {
            int ki = static_cast<int>(k);
            if (row_active(active, ki, ParamRow::CapMax)) continue;
            if (row_active(active, ki, ParamRow::CapMin)) continue;
            if (row_active(active, ki, ParamRow::FwdUp)) continue;
            if (row_active(active, ki, ParamRow::BwdDn)) continue;
            if (best < 0 || sys.units[k].marginal_cost <
                                sys.units[static_cast<std::size_t>(best)].marginal_cost)
                best = ki;
        }

        SegmentPriceInfo info;
        info.segment = si;
        if (best >= 0) {
            info.marginal_unit = sys.units[static_cast<std::size_t>(best)].id;
            info.marginal_cost = sys.units[static_cast<std::size_t>(best)].marginal_cost;
        }

        // Price variation inside the segment (affine in t and D(t)).
        double dmin = D.eval(seg.t_start), dmax = dmin;
        auto consider = [&](double t) {
            double v = D.eval(t);
            dmin = std::min(dmin, v);
            dmax = std::max(dmax, v);
        };
        consider(seg.t_end);
        RootScanOptions ropt;
        ropt.grid_step = std::max(1e-4, (seg.t_end - seg.t_start) / 512.0);
        for (double r :
             scan_sign_changes(traj.load().derivative_piecewise(), seg.t_start, seg.t_end, ropt)
                 .roots)
            consider(r);
        double variation =
            std::abs(seg.p_t) * (seg.t_end - seg.t_start) + std::abs(seg.p_D) * (dmax - dmin);
        info.price_constant = variation <= price_tol;
        if (!info.price_constant) {
            double mid = 0.5 * (seg.t_start + seg.t_end);
            out.inconsistencies.push_back(
                {mid, seg.price_at(mid, D.eval(mid)),
                 best >= 0 ? info.marginal_cost : std::numeric_limits<double>::quiet_NaN(),
                 info.marginal_unit, "price varies inside a segment without a marginal-unit switch"});
            out.new_endpoints.push_back(mid);
        }

        double mid = 0.5 * (seg.t_start + seg.t_end);
        for (double t : {seg.t_start, mid, seg.t_end}) {
            double lambda = seg.price_at(t, D.eval(t));
            if (best < 0) {
                out.inconsistencies.push_back({t, lambda,
                                               std::numeric_limits<double>::quiet_NaN(), "",
                                               "no marginal-unit candidate"});
                continue;
            }
            if (std::abs(lambda - info.marginal_cost) > price_tol)
                out.inconsistencies.push_back({t, lambda, info.marginal_cost,
                                               info.marginal_unit,
                                               "price differs from the marginal unit's cost"});
        }
        out.segment_prices.push_back(std::move(info));
    }
    std::sort(out.new_endpoints.begin(), out.new_endpoints.end());
    return out;
}

VerificationReport verify_all(const PiecewiseTrajectory& traj, const System& sys,
                              const AdaptiveDispatchResult& dispatch, double mismatch_tol,
                              double price_tol, double grid_step) {
    VerificationReport rep;
    rep.endpoint_mismatches = check_continuity(traj, dispatch);
    for (const auto& e : rep.endpoint_mismatches)
        rep.max_mismatch = std::max(rep.max_mismatch, e.max_abs);

    RampCheckResult ramp = check_ramping(traj, sys, grid_step);
    rep.ramp_violations = std::move(ramp.violations);
    PriceCheckResult price = check_price_consistency(traj, sys, price_tol);
    rep.price_inconsistencies = std::move(price.inconsistencies);
    rep.segment_prices = std::move(price.segment_prices);

    std::vector<double> proposals;
    proposals.insert(proposals.end(), ramp.new_endpoints.begin(), ramp.new_endpoints.end());
    proposals.insert(proposals.end(), price.new_endpoints.begin(), price.new_endpoints.end());
    std::sort(proposals.begin(), proposals.end());
    const double dedup_tol = 1e-6; // minutes
    for (double p : proposals) {
        bool dup = false;
        for (double e : dispatch.endpoints)
            if (std::abs(e - p) <= dedup_tol) {
                dup = true;
                break;
            }
        if (!dup && !rep.new_endpoints.empty() &&
            std::abs(rep.new_endpoints.back() - p) <= dedup_tol)
            dup = true;
        if (!dup) rep.new_endpoints.push_back(p);
    }

    rep.converged = rep.max_mismatch < mismatch_tol && rep.ramp_violations.empty() &&
                    rep.price_inconsistencies.empty();
    return rep;
}

std::string VerificationReport::to_table() const {
    std::ostringstream os;
    os << "endpoint mismatches (max " << format_number(max_mismatch) << " MW):\n";
    for (const auto& e : endpoint_mismatches)
        os << "  t=" << format_number(e.instant) << "  max|delta|=" << format_number(e.max_abs)
           << "\n";
    os << "ramp violations: " << ramp_violations.size() << "\n";
    for (const auto& v : ramp_violations)
        os << "  unit=" << v.unit << " t=" << format_number(v.instant)
           << " x'=" << format_number(v.derivative) << " bound=" << format_number(v.bound)
           << "\n";
    os << "price inconsistencies: " << price_inconsistencies.size() << "\n";
    for (const auto& p : price_inconsistencies)
        os << "  t=" << format_number(p.instant) << " lambda=" << format_number(p.lambda)
           << " expected=" << format_number(p.expected_cost) << " unit=" << p.marginal_unit
           << " (" << p.note << ")\n";
    os << "new endpoints: ";
    for (double e : new_endpoints) os << format_number(e) << " ";
    os << "\nconverged: " << (converged ? "yes" : "no") << "\n";
    return os.str();
}

std::string VerificationReport::to_json() const {
    nlohmann::json j;
    j["max_mismatch"] = round9(max_mismatch);
    j["converged"] = converged;
    j["endpoint_mismatches"] = nlohmann::json::array();
    for (const auto& e : endpoint_mismatches)
        j["endpoint_mismatches"].push_back(
            {{"t", round9(e.instant)}, {"max_abs", round9(e.max_abs)}});
    j["ramp_violations"] = nlohmann::json::array();
    for (const auto& v : ramp_violations)
        j["ramp_violations"].push_back({{"unit", v.unit},
                                        {"t", round9(v.instant)},
                                        {"derivative", round9(v.derivative)},
                                        {"bound", round9(v.bound)}});
    j["price_inconsistencies"] = nlohmann::json::array();
    for (const auto& p : price_inconsistencies)
        j["price_inconsistencies"].push_back({{"t", round9(p.instant)},
                                              {"lambda", round9(p.lambda)},
                                              {"expected", round9(p.expected_cost)},
                                              {"unit", p.marginal_unit},
                                              {"note", p.note}});
    j["new_endpoints"] = nlohmann::json::array();
    for (double e : new_endpoints) j["new_endpoints"].push_back(round9(e));
    return j.dump(2) + "\n";
}

} // namespace cted
