#include "cted/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cted/errors.hpp"
#include "cted/numfmt.hpp"

namespace cted {

namespace {

constexpr int kMaxLoadDegree = 16;

// Extrema of a piecewise polynomial over its full domain: evaluate at
// breakpoints and at interior critical points (roots of the derivative,
// isolated by sign-change scanning).
std::pair<double, double> extrema(const PiecewisePolynomial& f) {
    double lo = f.eval(f.lo()), hi = lo;
    auto consider = [&](double t) {
        double v = f.eval(t);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    for (double t : f.breakpoints()) consider(t);
    PiecewisePolynomial df = f.derivative();
    RootScanOptions opt;
    opt.grid_step = std::max(1e-4, (f.hi() - f.lo()) / 4096.0);
    for (double r : scan_sign_changes(df, f.lo(), f.hi(), opt).roots) consider(r);
    return {lo, hi};
}

} // namespace

void Unit::validate() const {
    if (id.empty()) throw ValidationError("unit id must be non-empty");
    if (!(g_min <= g_max))
        throw ValidationError("unit '" + id + "': g_min must be <= g_max");
    if (!(ramp_up > 0.0))
        throw ValidationError("unit '" + id + "': ramp_up must be > 0");
    if (!(ramp_down_mag > 0.0))
        throw ValidationError("unit '" + id + "': ramp_down must be > 0");
    if (!(marginal_cost >= 0.0))
        throw ValidationError("unit '" + id + "': marginal_cost must be >= 0");
    for (double v : {marginal_cost, g_min, g_max, ramp_up, ramp_down_mag})
        if (!std::isfinite(v))
            throw ValidationError("unit '" + id + "': non-finite parameter");
}

LoadProfile::LoadProfile(std::vector<double> coefficients, double start, double end)
    : profile_(start, end, Polynomial(std::move(coefficients))),
      derivative_(profile_.derivative()) {
    validate_and_cache_extrema();
}

LoadProfile::LoadProfile(PiecewisePolynomial profile)
    : profile_(std::move(profile)), derivative_(profile_.derivative()) {
    validate_and_cache_extrema();
}

void LoadProfile::validate_and_cache_extrema() {
    if (!(profile_.lo() < profile_.hi()))
        throw ValidationError("load horizon: start must be < end");
    for (const auto& p : profile_.pieces())
        if (p.degree() > kMaxLoadDegree)
            throw ValidationError("load coefficients: degree exceeds 16");
    auto [lo, hi] = extrema(profile_);
    min_val_ = lo;
    max_val_ = hi;
    if (!(min_val_ > 0.0))
        throw ValidationError("load: D(t) must be strictly positive on the horizon");
}

double LoadProfile::eval(double t) const {
    const double slack = 1e-9 * (1.0 + std::abs(end()));
    if (t < start() - slack || t > end() + slack)
        throw OutOfHorizon("t outside horizon [" + format_number(start()) + ", " +
                           format_number(end()) + "]");
    return profile_.eval(t);
}

double LoadProfile::eval_derivative(double t) const {
    const double slack = 1e-9 * (1.0 + std::abs(end()));
    if (t < start() - slack || t > end() + slack)
        throw OutOfHorizon("t outside horizon [" + format_number(start()) + ", " +
                           format_number(end()) + "]");
    return derivative_.eval(t);
}

const std::vector<double>& LoadProfile::coefficients() const {
    if (!is_single_polynomial())
        throw ValidationError("load: coefficients() requires a single-polynomial profile");
    return profile_.pieces().front().coefficients();
}

LoadProfile LoadProfile::with_bump(double a, double b, const Polynomial& bump) const {
    return LoadProfile(profile_.with_window_added(a, b, bump));
}

System::System(std::vector<Unit> units_in, LoadProfile load_in)
    : units(std::move(units_in)), load(std::move(load_in)) {
    if (units.empty()) throw ValidationError("system needs at least one unit");
    for (const Unit& u : units) u.validate();
    for (std::size_t i = 0; i < units.size(); ++i)
        for (std::size_t j = i + 1; j < units.size(); ++j)
            if (units[i].id == units[j].id)
                throw ValidationError("duplicate unit id '" + units[i].id + "'");

    double sum_max = 0.0, sum_min = 0.0;
    for (const Unit& u : units) {
        sum_max += u.g_max;
        sum_min += u.g_min;
    }
    // Static capacity screen; ramping feasibility is decided by the solver.
    if (sum_max < load.max_value())
        throw InfeasibleError("capacity screen: sum of g_max (" + format_number(sum_max) +
                              " MW) below peak load (" + format_number(load.max_value()) +
                              " MW)");
    if (sum_min > load.min_value())
        throw InfeasibleError("capacity screen: sum of g_min (" + format_number(sum_min) +
                              " MW) above minimum load (" + format_number(load.min_value()) +
                              " MW)");
}

std::vector<double> System::cost_vector() const {
    std::vector<double> f(units.size());
    for (std::size_t k = 0; k < units.size(); ++k) f[k] = units[k].marginal_cost;
    return f;
}

namespace {

double require_number(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ParseError("missing or non-numeric field '" + key + "'");
    return j[key].get<double>();
}

} // namespace

System parse_system(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }

    if (!j.contains("units") || !j["units"].is_array() || j["units"].empty())
        throw ParseError("'units' must be a non-empty array");
    if (!j.contains("load") || !j["load"].is_object())
        throw ParseError("'load' must be an object");

    std::vector<Unit> units;
    for (const auto& ju : j["units"]) {
        Unit u;
        if (!ju.contains("id") || !ju["id"].is_string())
            throw ParseError("unit 'id' must be a string");
        u.id = ju["id"].get<std::string>();
        u.marginal_cost = require_number(ju, "marginal_cost");
        u.g_min = require_number(ju, "g_min");
        u.g_max = require_number(ju, "g_max");
        u.ramp_up = require_number(ju, "ramp_up");
        u.ramp_down_mag = require_number(ju, "ramp_down");
        units.push_back(std::move(u));
    }

    const auto& jl = j["load"];
    if (!jl.contains("coefficients") || !jl["coefficients"].is_array())
        throw ParseError("load 'coefficients' must be an array");
    std::vector<double> coef;
    for (const auto& c : jl["coefficients"]) {
        if (!c.is_number()) throw ParseError("load coefficients must be numeric");
        coef.push_back(c.get<double>());
    }
    if (!jl.contains("horizon") || !jl["horizon"].is_array() || jl["horizon"].size() != 2)
        throw ParseError("load 'horizon' must be [S, T]");
    double s = jl["horizon"][0].get<double>();
    double t = jl["horizon"][1].get<double>();

    return System(std::move(units), LoadProfile(std::move(coef), s, t));
}

System load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str());
}

std::string serialize_system(const System& sys) {
    nlohmann::json j;
    j["units"] = nlohmann::json::array();
    for (const Unit& u : sys.units) {
        j["units"].push_back({{"id", u.id},
                              {"marginal_cost", u.marginal_cost},
                              {"g_min", u.g_min},
                              {"g_max", u.g_max},
                              {"ramp_up", u.ramp_up},
                              {"ramp_down", u.ramp_down_mag}});
    }
    j["load"] = {{"coefficients", sys.load.coefficients()},
                 {"horizon", {sys.load.start(), sys.load.end()}}};
    return j.dump(2) + "\n";
}

} // namespace cted
