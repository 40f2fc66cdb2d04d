#pragma once

#include <vector>
#include <Eigen/Dense>

namespace cted {

/// min f'x  s.t.  A_eq x = b_eq,  A_ie x <= b_ie   (x free).
struct LinearProgram {
    Eigen::VectorXd f;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd A_ie;
    Eigen::VectorXd b_ie;

    Eigen::Index num_vars() const { return f.size(); }
    void check_dimensions() const; // throws ValidationError
};

struct LpOptions {
    double feas_tol = 1e-8;   // absolute tolerance on constraint residuals
    double dual_tol = 1e-9;   // multiplier sign tolerance
    double active_tol = 1e-8; // tightness tolerance for the reported active set
    int bland_after_stalls = 50;
    long max_pivots = -1;     // < 0: automatic cap from problem size
    int refactor_every = 64;
};

/// Multiplier sign convention: mu >= 0 with stationarity
///     f = A_eq' lambda - A_ie' mu,
/// i.e. the adjoint acts on the >=-sense image of the inequality rows, so the
/// balance multiplier lambda is the price of one extra MW of load. The dual
/// objective under this convention is b_eq' lambda - b_ie' mu.
struct LpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;            // per original equality row (0 on dropped rows)
    Eigen::VectorXd mu;                // per inequality row, >= 0 up to dual_tol
    std::vector<int> active_set;       // all inequalities tight within active_tol, sorted
    std::vector<int> basis;            // working-set inequality rows at the optimum, sorted
    std::vector<int> dropped_equalities; // redundant equality rows removed in preprocessing
    double objective = 0.0;
    long pivots = 0;

    double dual_objective(const LinearProgram& lp) const;
    double stationarity_residual(const LinearProgram& lp) const; // inf-norm
};

/// Primal active-set solve. `basis_hint` optionally seeds the initial working
/// set with inequality row indices. Throws InfeasibleError (with a Farkas
/// certificate), UnboundedError (with a primal ray), or NumericalFailure.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opt = {},
                    const std::vector<int>& basis_hint = {});

} // namespace cted
