#include "cted/discrete.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cted/errors.hpp"
#include "cted/numfmt.hpp"

namespace cted {

double LmpStepFunction::value_at(double t) const {
    if (values.empty()) throw ValidationError("lmp step function is empty");
    if (t <= breakpoints.front()) return values.front();
    if (t >= breakpoints.back()) return values.back();
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - breakpoints.begin()) - 1;
    return values[std::min(idx, values.size() - 1)];
}

std::string LmpStepFunction::to_json() const {
    nlohmann::json j;
    j["breakpoints"] = nlohmann::json::array();
    for (double b : breakpoints) j["breakpoints"].push_back(round9(b));
    j["values"] = nlohmann::json::array();
    for (double v : values) j["values"].push_back(round9(v));
    return j.dump(2) + "\n";
}

DiscreteDispatchResult discrete_dispatch(const System& sys, double resolution_minutes,
                                         const LpOptions& opt) {
    if (!(resolution_minutes > 0))
        throw ValidationError("discrete dispatch: resolution must be positive");
    const double span = sys.load.horizon_length();
    double intervals = span / resolution_minutes;
    double rounded = std::round(intervals);
    if (std::abs(intervals - rounded) > 1e-9 * (1.0 + intervals) || rounded < 1)
        throw ValidationError("discrete dispatch: resolution must divide the horizon length");
    const long n = static_cast<long>(rounded);

    std::vector<double> endpoints(static_cast<std::size_t>(n) + 1);
    for (long i = 0; i <= n; ++i)
        endpoints[static_cast<std::size_t>(i)] =
            sys.load.start() + (span * static_cast<double>(i)) / static_cast<double>(n);
    endpoints.back() = sys.load.end();

    DiscreteDispatchResult out;
    out.resolution = resolution_minutes;
    out.dispatch = adaptive_dispatch(sys, endpoints, opt);
    out.lmp.breakpoints = out.dispatch.endpoints;
    out.lmp.values.assign(static_cast<std::size_t>(n), 0.0);
    for (long i = 0; i < n; ++i)
        out.lmp.values[static_cast<std::size_t>(i)] = out.dispatch.lmp(i);
    return out;
}

} // namespace cted
