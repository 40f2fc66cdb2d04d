#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cted/lp.hpp"

namespace cted {

/// Two-parameter LP: min f'x  s.t.  A_eq x = b_eq + E_eq theta,
/// A_ie x <= b_ie + E_ie theta, with theta = [t, D^P]' ranging over a box.
struct ParametricLP {
    Eigen::VectorXd f;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd E_eq; // me x 2
    Eigen::MatrixXd A_ie;
    Eigen::VectorXd b_ie;
    Eigen::MatrixXd E_ie; // mi x 2
    Eigen::Vector2d theta_lo;
    Eigen::Vector2d theta_hi;

    void check_dimensions() const;
    LinearProgram instantiate(const Eigen::Vector2d& theta) const;
    bool in_domain(const Eigen::Vector2d& theta, double tol) const;
};

/// c_t * t + c_D * D^P <= d
struct Halfspace {
    double c_t = 0.0;
    double c_D = 0.0;
    double d = 0.0;
};

/// Polytope in theta-space over which the optimal active set is constant and
/// the primal/dual solutions are affine in theta. With a theta-independent
/// cost vector the dual maps are constant (A_lam and A_mu are zero); the
/// general affine shape is kept for the serialized form.
struct CriticalRegion {
    int index = -1;
    std::vector<Halfspace> halfspaces;
    std::vector<int> active_set;   // tight inequality rows (the optimal basis), sorted
    std::vector<int> inactive_set; // complement, sorted
    Eigen::MatrixXd A_x;           // n x 2
    Eigen::VectorXd B_x;           // n
    Eigen::MatrixXd A_lam;         // me x 2
    Eigen::VectorXd B_lam;         // me
    Eigen::MatrixXd A_mu;          // |active| x 2, rows follow active_set order
    Eigen::VectorXd B_mu;
    Eigen::Vector2d interior_point; // Chebyshev center
    double chebyshev_radius = 0.0;

    bool contains(const Eigen::Vector2d& theta, double tol) const;
    Eigen::VectorXd primal(const Eigen::Vector2d& theta) const;
    Eigen::VectorXd equality_duals(const Eigen::Vector2d& theta) const;
    /// Polygon vertices (unordered) of the region.
    std::vector<Eigen::Vector2d> vertices(double tol) const;
};

struct MplpOptions {
    LpOptions lp;
    double contain_tol = 1e-8;
    double facet_step = 1e-6;  // relative to region diameter
    int max_regions = 10000;
    int degenerate_retries = 5;
    unsigned seed = 12345;     // for the degeneracy perturbation only
};

/// Build the critical region containing (or adjacent to) theta0. Retries with
/// a tiny seeded perturbation of theta0 when the region comes out
/// lower-dimensional. Throws InfeasiblePoint or DegenerateRegion.
CriticalRegion build_region(const ParametricLP& plp, const Eigen::Vector2d& theta0,
                            const MplpOptions& opt = {});

/// Lowest-index region containing theta (boundary ties resolve to the lowest
/// index); nullopt when none match.
std::optional<int> locate(const std::vector<CriticalRegion>& regions,
                          const Eigen::Vector2d& theta, double tol = 1e-8);

/// Region storage shared by exploration and tracing: regions are built on
/// demand and registered under their active-set key.
class RegionBank {
public:
    RegionBank(ParametricLP plp, MplpOptions opt = {});

    const ParametricLP& plp() const { return plp_; }
    const std::vector<CriticalRegion>& regions() const { return regions_; }

    std::optional<int> locate_built(const Eigen::Vector2d& theta) const;
    /// Locate among built regions or build the one containing theta.
    int locate_or_build(const Eigen::Vector2d& theta);

    /// Breadth-first facet-crossing exploration from a feasible seed; covers
    /// the feasible part of the domain reachable from it.
    void explore_all(const Eigen::Vector2d& seed);

private:
    ParametricLP plp_;
    MplpOptions opt_;
    std::vector<CriticalRegion> regions_;
    std::vector<std::vector<int>> keys_; // sorted active sets, parallel to regions_
    int adopt(CriticalRegion region);    // dedup + register, returns index
};

/// Facet-crossing exploration as a one-shot call.
std::vector<CriticalRegion> explore_regions(const ParametricLP& plp,
                                            const Eigen::Vector2d& seed,
                                            const MplpOptions& opt = {});

std::string dump_regions_json(const ParametricLP& plp,
                              const std::vector<CriticalRegion>& regions);

} // namespace cted
