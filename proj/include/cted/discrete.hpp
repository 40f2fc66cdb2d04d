#pragma once

#include <string>
#include <vector>

#include "cted/model.hpp"
#include "cted/verify.hpp"

namespace cted {

/// Left-closed right-open step function: value(i) holds on
/// [breakpoints[i], breakpoints[i+1]); the last value also covers the final
/// breakpoint.
struct LmpStepFunction {
    std::vector<double> breakpoints; // size = values.size() + 1
    std::vector<double> values;      // $/MWh

    double value_at(double t) const;
    std::string to_json() const;
};

struct DiscreteDispatchResult {
    double resolution = 0.0; // minutes
    AdaptiveDispatchResult dispatch;
    LmpStepFunction lmp;
};

/// Uniform-grid dispatch at the given resolution (which must divide the
/// horizon length) with the LMP held constant over each interval.
DiscreteDispatchResult discrete_dispatch(const System& sys, double resolution_minutes,
                                         const LpOptions& opt = {});

} // namespace cted
