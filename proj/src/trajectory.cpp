#include "cted/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cted/errors.hpp"
#include "cted/numfmt.hpp"

namespace cted {

using Eigen::Index;
using Eigen::Vector2d;
using Eigen::VectorXd;

void UpdatingRange::validate(const System& sys) const {
    if (!(s_u < t_u)) throw ValidationError("updating range: s_u must be < t_u");
    const Index K = static_cast<Index>(sys.unit_count());
    if (boundary_start.size() != K || boundary_end.size() != K)
        throw ValidationError("updating range: boundary vector size must match unit count");
    const double cap_tol = 1e-6;
    for (Index k = 0; k < K; ++k) {
        const Unit& u = sys.units[static_cast<std::size_t>(k)];
        for (double v : {boundary_start(k), boundary_end(k)}) {
            if (v < u.g_min - cap_tol || v > u.g_max + cap_tol)
                throw ValidationError("updating range: boundary value for unit '" + u.id +
                                      "' outside capacity bounds");
        }
    }
    auto check_balance = [&](const VectorXd& x, double t) {
        double target = sys.load.eval(t);
        if (std::abs(x.sum() - target) > 1e-6 * std::max(1.0, 1e-3 * std::abs(target)) + 1e-6)
            throw ValidationError("updating range: boundary dispatch does not balance the load at t=" +
                                  format_number(t));
    };
    check_balance(boundary_start, s_u);
    check_balance(boundary_end, t_u);
}

VectorXd TrajectorySegment::gen_at(double t, double load_value) const {
    return a_t * t + a_D * load_value + b;
}

double TrajectorySegment::gen_derivative(int unit, double load_derivative) const {
    return a_t(unit) + a_D(unit) * load_derivative;
}

double TrajectorySegment::price_at(double t, double load_value) const {
    return p_t * t + p_D * load_value + p_b;
}

PiecewiseTrajectory::PiecewiseTrajectory(std::vector<TrajectorySegment> segments,
                                         LoadProfile load, std::vector<std::string> unit_ids)
    : segments_(std::move(segments)), load_(std::move(load)), unit_ids_(std::move(unit_ids)) {
    if (segments_.empty()) throw ValidationError("trajectory: no segments");
    const Index K = static_cast<Index>(unit_ids_.size());
    double scale = 1.0 + std::abs(segments_.back().t_end);
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        if (!(s.t_start < s.t_end))
            throw ValidationError("trajectory: segment endpoints must increase");
        if (s.a_t.size() != K || s.a_D.size() != K || s.b.size() != K)
            throw ValidationError("trajectory: segment coefficient size mismatch");
        if (i > 0 && std::abs(s.t_start - segments_[i - 1].t_end) > 1e-9 * scale)
            throw ValidationError("trajectory: segments must abut exactly");
    }
}

std::vector<double> PiecewiseTrajectory::endpoints() const {
    std::vector<double> e;
    e.push_back(segments_.front().t_start);
    for (const auto& s : segments_) e.push_back(s.t_end);
    return e;
}

std::size_t PiecewiseTrajectory::segment_index_left(double t) const {
    // Segment whose (t_start, t_end] contains t; t at or before the start of
    // the first segment maps to segment 0.
    for (std::size_t i = 0; i < segments_.size(); ++i)
        if (t <= segments_[i].t_end) return i;
    return segments_.size() - 1;
}

std::size_t PiecewiseTrajectory::segment_index_right(double t) const {
    // Segment whose [t_start, t_end) contains t; t at or past the end of the
    // last segment maps to the last one.
    for (std::size_t i = segments_.size(); i-- > 0;)
        if (t >= segments_[i].t_start) return i;
    return 0;
}

VectorXd PiecewiseTrajectory::gen_at(double t) const { return gen_left(t); }

VectorXd PiecewiseTrajectory::gen_left(double t) const {
    const auto& s = segments_[segment_index_left(t)];
    return s.gen_at(t, load_.eval(t));
}

VectorXd PiecewiseTrajectory::gen_right(double t) const {
    const auto& s = segments_[segment_index_right(t)];
    return s.gen_at(t, load_.eval(t));
}

double PiecewiseTrajectory::price_at(double t) const { return price_left(t); }

double PiecewiseTrajectory::price_left(double t) const {
    const auto& s = segments_[segment_index_left(t)];
    return s.price_at(t, load_.eval(t));
}

double PiecewiseTrajectory::price_right(double t) const {
    const auto& s = segments_[segment_index_right(t)];
    return s.price_at(t, load_.eval(t));
}

double PiecewiseTrajectory::total_cost(const std::vector<double>& marginal_costs) const {
    if (marginal_costs.size() != unit_ids_.size())
        throw ValidationError("total_cost: cost vector size mismatch");
    double acc = 0.0;
    const auto& D = load_.piecewise();
    for (const auto& s : segments_) {
        double dt = s.t_end - s.t_start;
        double t2 = 0.5 * (s.t_end * s.t_end - s.t_start * s.t_start);
        double dint = D.integrate(s.t_start, s.t_end);
        for (Index k = 0; k < s.b.size(); ++k) {
            double unit_int = s.a_t(k) * t2 + s.a_D(k) * dint + s.b(k) * dt;
            acc += marginal_costs[static_cast<std::size_t>(k)] * unit_int;
        }
    }
    return acc / 60.0; // minutes -> hours
}

ParametricLP assemble_parametric_model(const System& sys, const UpdatingRange& range) {
    range.validate(sys);
    const Index K = static_cast<Index>(sys.unit_count());
    const int mi = param_row_count(static_cast<int>(K));

    ParametricLP plp;
    plp.f = Eigen::Map<const VectorXd>(sys.cost_vector().data(), K);
    plp.A_eq = Eigen::MatrixXd::Ones(1, K);
    plp.b_eq = VectorXd::Zero(1);
    plp.E_eq.resize(1, 2);
    plp.E_eq << 0.0, 1.0; // balance selects the load parameter
    plp.A_ie = Eigen::MatrixXd::Zero(mi, K);
    plp.b_ie = VectorXd::Zero(mi);
    plp.E_ie = Eigen::MatrixXd::Zero(mi, 2);

    for (Index k = 0; k < K; ++k) {
        const Unit& u = sys.units[static_cast<std::size_t>(k)];
        const double xs = range.boundary_start(k);
        const double xe = range.boundary_end(k);
        int row = param_row_index(static_cast<int>(k), ParamRow::CapMax);
        plp.A_ie(row, k) = 1.0;
        plp.b_ie(row) = u.g_max;
        row = param_row_index(static_cast<int>(k), ParamRow::CapMin);
        plp.A_ie(row, k) = -1.0;
        plp.b_ie(row) = -u.g_min;
        row = param_row_index(static_cast<int>(k), ParamRow::FwdUp);
        plp.A_ie(row, k) = 1.0;
        plp.E_ie(row, 0) = u.ramp_up;
        plp.b_ie(row) = xs - u.ramp_up * range.s_u;
        row = param_row_index(static_cast<int>(k), ParamRow::FwdDn);
        plp.A_ie(row, k) = -1.0;
        plp.E_ie(row, 0) = u.ramp_down_mag;
        plp.b_ie(row) = -xs - u.ramp_down_mag * range.s_u;
        row = param_row_index(static_cast<int>(k), ParamRow::BwdUp);
        plp.A_ie(row, k) = -1.0;
        plp.E_ie(row, 0) = -u.ramp_up;
        plp.b_ie(row) = u.ramp_up * range.t_u - xe;
        row = param_row_index(static_cast<int>(k), ParamRow::BwdDn);
        plp.A_ie(row, k) = 1.0;
        plp.E_ie(row, 0) = -u.ramp_down_mag;
        plp.b_ie(row) = xe + u.ramp_down_mag * range.t_u;
    }

    // Load bounds over the range (exact: endpoint and critical-point values).
    const auto& D = sys.load.piecewise();
    double dmin = sys.load.eval(range.s_u), dmax = dmin;
    auto consider = [&](double t) {
        double v = D.eval(t);
        dmin = std::min(dmin, v);
        dmax = std::max(dmax, v);
    };
    consider(range.t_u);
    for (double bp : D.breakpoints())
        if (bp > range.s_u && bp < range.t_u) consider(bp);
    RootScanOptions ropt;
    ropt.grid_step = std::max(1e-4, (range.t_u - range.s_u) / 4096.0);
    for (double r : scan_sign_changes(sys.load.derivative_piecewise(), range.s_u, range.t_u, ropt).roots)
        consider(r);

    double swing = dmax - dmin;
    double margin = std::max(0.01 * swing, 1e-6 * (1.0 + std::abs(dmax)));
    plp.theta_lo = Vector2d(range.s_u, dmin - margin);
    plp.theta_hi = Vector2d(range.t_u, dmax + margin);
    return plp;
}

TraceResult trace(const System& sys, const UpdatingRange& range, RegionBank& bank,
                  const TraceOptions& opt) {
    range.validate(sys);
    TraceResult out;
    const auto& D = sys.load.piecewise();
    const double span = range.t_u - range.s_u;
    const double end_eps = 1e-12 * (1.0 + std::abs(range.t_u));

    RootScanOptions ropt;
    ropt.grid_step = opt.grid_step;
    ropt.bisect_tol = opt.bisect_tol;

    double t_cur = range.s_u;
    long guard = 0;
    while (t_cur < range.t_u - end_eps) {
        if (++guard > opt.max_segments)
            throw RootIsolationFailure("trace: segment count exceeded " +
                                       std::to_string(opt.max_segments));
        double probe = std::min(opt.probe, 0.5 * (range.t_u - t_cur));
        double tp = t_cur + probe;
        int idx;
        try {
            idx = bank.locate_or_build(Vector2d(tp, D.eval(tp)));
        } catch (const InfeasiblePoint&) {
            throw InfeasibleDispatch("trace: theta(t) infeasible at t=" + format_number(tp));
        }

        // Exit instant: earliest rising crossing of any boundary polynomial
        // g(t) = c_t t + c_D D(t) - d over (t_cur, T"]. A probe landing in a
        // tolerance sliver of the wrong region is caught by validating the
        // segment midpoint and re-locating there once.
        double t_exit = range.t_u;
        for (int attempt = 0;; ++attempt) {
            const CriticalRegion& candidate = bank.regions()[static_cast<std::size_t>(idx)];
            t_exit = range.t_u;
            for (const Halfspace& h : candidate.halfspaces) {
                PiecewisePolynomial g = D.affine_compose(h.c_t, h.c_D, -h.d);
                double r = first_rising_crossing(g, t_cur, std::min(t_exit, range.t_u), ropt,
                                                 &out.tangential_contacts);
                if (r > t_cur && r < t_exit) t_exit = r;
            }
            if (attempt >= 1) break;
            double mid = 0.5 * (t_cur + t_exit);
            if (candidate.contains(Vector2d(mid, D.eval(mid)), 1e-6)) break;
            try {
                int better = bank.locate_or_build(Vector2d(mid, D.eval(mid)));
                if (better == idx) break;
                idx = better;
            } catch (const InfeasiblePoint&) {
                throw InfeasibleDispatch("trace: theta(t) infeasible at t=" +
                                         format_number(mid));
            }
        }
        const CriticalRegion& region = bank.regions()[static_cast<std::size_t>(idx)];
        if (t_exit <= t_cur + 1e-13 * (1.0 + std::abs(t_cur)))
            t_exit = std::min(range.t_u, t_cur + 1e-12 * (1.0 + std::abs(t_cur)));

        TrajectorySegment seg;
        seg.t_start = t_cur;
        seg.t_end = t_exit;
        seg.region_index = region.index;
        seg.active_set = region.active_set;
        seg.a_t = region.A_x.col(0);
        seg.a_D = region.A_x.col(1);
        seg.b = region.B_x;
        seg.p_t = region.A_lam(0, 0);
        seg.p_D = region.A_lam(0, 1);
        seg.p_b = region.B_lam(0);
        out.segments.push_back(std::move(seg));
        t_cur = t_exit;
    }
    if (out.segments.empty())
        throw ValidationError("trace: empty updating range");
    (void)span;
    return out;
}

std::string serialize_trajectory(const PiecewiseTrajectory& traj) {
    nlohmann::json j;
    j["units"] = traj.unit_ids();
    nlohmann::json coef = nlohmann::json::array();
    for (double c : traj.load().coefficients()) coef.push_back(round9(c));
    j["load"] = {{"coefficients", coef},
                 {"horizon", {round9(traj.load().start()), round9(traj.load().end())}}};
    j["span"] = {round9(traj.start()), round9(traj.end())};
    nlohmann::json eps = nlohmann::json::array();
    for (double e : traj.endpoints()) eps.push_back(round9(e));
    j["endpoints"] = eps;
    j["segments"] = nlohmann::json::array();
    for (const auto& s : traj.segments()) {
        nlohmann::json js;
        js["t_start"] = round9(s.t_start);
        js["t_end"] = round9(s.t_end);
        js["region_index"] = s.region_index;
        js["active_set"] = s.active_set;
        js["units"] = nlohmann::json::array();
        for (Index k = 0; k < s.b.size(); ++k)
            js["units"].push_back({{"a_t", round9(s.a_t(k))},
                                   {"a_D", round9(s.a_D(k))},
                                   {"b", round9(s.b(k))}});
        js["price"] = {{"p_t", round9(s.p_t)}, {"p_D", round9(s.p_D)}, {"p_b", round9(s.p_b)}};
        j["segments"].push_back(std::move(js));
    }
    return j.dump(2) + "\n";
}

PiecewiseTrajectory parse_trajectory(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid trajectory JSON: ") + e.what());
    }
    try {
        std::vector<std::string> ids = j.at("units").get<std::vector<std::string>>();
        auto jl = j.at("load");
        LoadProfile load(jl.at("coefficients").get<std::vector<double>>(),
                         jl.at("horizon").at(0).get<double>(),
                         jl.at("horizon").at(1).get<double>());
        std::vector<TrajectorySegment> segs;
        for (const auto& js : j.at("segments")) {
            TrajectorySegment s;
            s.t_start = js.at("t_start").get<double>();
            s.t_end = js.at("t_end").get<double>();
            s.region_index = js.at("region_index").get<int>();
            s.active_set = js.at("active_set").get<std::vector<int>>();
            const auto& units = js.at("units");
            s.a_t.resize(static_cast<Index>(units.size()));
            s.a_D.resize(static_cast<Index>(units.size()));
            s.b.resize(static_cast<Index>(units.size()));
            for (std::size_t k = 0; k < units.size(); ++k) {
                s.a_t(static_cast<Index>(k)) = units[k].at("a_t").get<double>();
                s.a_D(static_cast<Index>(k)) = units[k].at("a_D").get<double>();
                s.b(static_cast<Index>(k)) = units[k].at("b").get<double>();
            }
            s.p_t = js.at("price").at("p_t").get<double>();
            s.p_D = js.at("price").at("p_D").get<double>();
            s.p_b = js.at("price").at("p_b").get<double>();
            segs.push_back(std::move(s));
        }
        return PiecewiseTrajectory(std::move(segs), std::move(load), std::move(ids));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trajectory JSON schema: ") + e.what());
    }
}

PiecewiseTrajectory load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_trajectory(ss.str());
}

} // namespace cted
