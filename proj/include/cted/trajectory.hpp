#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cted/model.hpp"
#include "cted/mplp.hpp"

namespace cted {

/// Inequality-row layout of the parametric dispatch model: six rows per unit,
/// in this order. Row index = 6 * unit + kind.
enum class ParamRow : int {
    CapMax = 0,  //  G_k <= g_max
    CapMin = 1,  // -G_k <= -g_min
    FwdUp = 2,   //  G_k - R_up t  <= x_k(S") - R_up S"   (departure from the start value)
    FwdDn = 3,   // -G_k - R_dn t  <= -x_k(S") - R_dn S"
    BwdUp = 4,   // -G_k + R_up t  <= R_up T" - x_k(T")   (end value reachable by ramping up)
    BwdDn = 5,   //  G_k + R_dn t  <= x_k(T") + R_dn T"   (end value reachable by ramping down)
};

inline int param_row_index(int unit, ParamRow kind) {
    return 6 * unit + static_cast<int>(kind);
}
inline int param_row_unit(int row) { return row / 6; }
inline ParamRow param_row_kind(int row) { return static_cast<ParamRow>(row % 6); }
inline int param_row_count(int units) { return 6 * units; }

/// Subperiod re-solved in one iteration, with the boundary dispatch the
/// trajectory must match at both ends.
struct UpdatingRange {
    double s_u = 0.0;
    double t_u = 0.0;
    Eigen::VectorXd boundary_start; // x(S"), per unit, MW
    Eigen::VectorXd boundary_end;   // x(T")

    void validate(const System& sys) const; // throws ValidationError
};

/// One affine piece: x_k(t) = a_t t + a_D D(t) + b, lambda(t) = p_t t + p_D D(t) + p_b.
struct TrajectorySegment {
    double t_start = 0.0;
    double t_end = 0.0;
    int region_index = -1;
    std::vector<int> active_set;
    Eigen::VectorXd a_t, a_D, b; // per unit
    double p_t = 0.0, p_D = 0.0, p_b = 0.0;

    Eigen::VectorXd gen_at(double t, double load_value) const;
    double gen_derivative(int unit, double load_derivative) const;
    double price_at(double t, double load_value) const;
};

/// Ordered, contiguous segments covering a span of the horizon, with the load
/// profile embedded so the pieces evaluate stand-alone.
class PiecewiseTrajectory {
public:
    PiecewiseTrajectory(std::vector<TrajectorySegment> segments, LoadProfile load,
                        std::vector<std::string> unit_ids);

    double start() const { return segments_.front().t_start; }
    double end() const { return segments_.back().t_end; }
    const std::vector<TrajectorySegment>& segments() const { return segments_; }
    const LoadProfile& load() const { return load_; }
    const std::vector<std::string>& unit_ids() const { return unit_ids_; }
    std::size_t unit_count() const { return unit_ids_.size(); }

    std::vector<double> endpoints() const; // segment boundaries, ascending

    /// Segment owning t under the left-limit convention: an interior shared
    /// endpoint belongs to the segment ending there.
    std::size_t segment_index_left(double t) const;
    std::size_t segment_index_right(double t) const;

    Eigen::VectorXd gen_at(double t) const;        // left-limit convention
    Eigen::VectorXd gen_left(double t) const;
    Eigen::VectorXd gen_right(double t) const;
    double price_at(double t) const;               // left-limit convention
    double price_left(double t) const;
    double price_right(double t) const;

    /// Exact production cost over the covered span, in dollars.
    double total_cost(const std::vector<double>& marginal_costs) const;

private:
    std::vector<TrajectorySegment> segments_;
    LoadProfile load_;
    std::vector<std::string> unit_ids_;
};

/// Eq.-style two-parameter model over the updating range: capacity rows,
/// secant ramp rows anchored at both boundaries, and the power balance
/// selecting the load parameter.
ParametricLP assemble_parametric_model(const System& sys, const UpdatingRange& range);

struct TraceOptions {
    double grid_step = 0.01;   // minutes, boundary-crossing scan
    double bisect_tol = 1e-9;  // minutes
    double probe = 1e-5;       // forward probe for region lookup past a crossing
    long max_segments = 100000;
};

struct TraceResult {
    std::vector<TrajectorySegment> segments;
    int tangential_contacts = 0; // boundary touches without a crossing
};

/// Follow theta(t) = [t, D(t)] through the critical regions of `bank` from
/// S" to T", cutting a segment at each region exit. Throws InfeasibleDispatch
/// when the curve leaves the feasible set.
TraceResult trace(const System& sys, const UpdatingRange& range, RegionBank& bank,
                  const TraceOptions& opt = {});

std::string serialize_trajectory(const PiecewiseTrajectory& traj);
PiecewiseTrajectory parse_trajectory(const std::string& json_text);
PiecewiseTrajectory load_trajectory(const std::string& path);

} // namespace cted
