#pragma once

#include <string>
#include <vector>

#include "cted/poly.hpp"

namespace cted {

// Units of measure, fixed globally: time in minutes, power in MW, ramp in
// MW/min, cost and price in $/MWh. Revenue integrals convert minutes to
// hours (divide by 60).

/// One committed generator's economic and physical parameters.
struct Unit {
    std::string id;
    double marginal_cost = 0.0;  // $/MWh
    double g_min = 0.0;          // MW
    double g_max = 0.0;          // MW
    double ramp_up = 0.0;        // MW/min, > 0
    double ramp_down_mag = 0.0;  // MW/min, > 0 (stored as a positive magnitude;
                                 // the downward ramp bound itself is -ramp_down_mag)

    void validate() const; // throws ValidationError naming the field
};

/// Load profile D(t) over the horizon [S, T], in minutes. Normally a single
/// polynomial; windowed perturbations make it piecewise.
class LoadProfile {
public:
    LoadProfile(std::vector<double> coefficients, double start, double end);
    explicit LoadProfile(PiecewisePolynomial profile);

    double start() const { return profile_.lo(); }
    double end() const { return profile_.hi(); }
    double horizon_length() const { return end() - start(); }

    double eval(double t) const;             // throws OutOfHorizon
    double eval_derivative(double t) const;  // exact polynomial derivative

    double min_value() const { return min_val_; }
    double max_value() const { return max_val_; }

    const PiecewisePolynomial& piecewise() const { return profile_; }
    const PiecewisePolynomial& derivative_piecewise() const { return derivative_; }

    /// Single-polynomial coefficients (ascending powers). Only valid for
    /// profiles built from one polynomial; used by the file writer.
    const std::vector<double>& coefficients() const;
    bool is_single_polynomial() const { return profile_.piece_count() == 1; }

    /// Copy of this profile with `bump` added on [a, b] (bump must vanish at
    /// a and b for the result to stay continuous).
    LoadProfile with_bump(double a, double b, const Polynomial& bump) const;

private:
    PiecewisePolynomial profile_;
    PiecewisePolynomial derivative_;
    double min_val_ = 0.0, max_val_ = 0.0;
    void validate_and_cache_extrema();
};

/// Units plus load; unit order fixes the index k. Every unit is committed
/// for the whole horizon. Immutable after construction.
struct System {
    std::vector<Unit> units;
    LoadProfile load;

    System(std::vector<Unit> units, LoadProfile load);

    std::size_t unit_count() const { return units.size(); }
    std::vector<double> cost_vector() const;
};

/// Parse and validate a system file (JSON, see README for the schema).
System load_system(const std::string& path);
System parse_system(const std::string& json_text);
std::string serialize_system(const System& sys);

inline double eval_load(const LoadProfile& load, double t) { return load.eval(t); }
inline double eval_load_derivative(const LoadProfile& load, double t) {
    return load.eval_derivative(t);
}

} // namespace cted
