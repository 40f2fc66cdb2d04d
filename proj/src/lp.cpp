#include "cted/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cted/errors.hpp"

namespace cted {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void LinearProgram::check_dimensions() const {
    const Index n = f.size();
    if (A_eq.rows() != b_eq.size())
        throw ValidationError("lp: A_eq rows and b_eq size differ");
    if (A_ie.rows() != b_ie.size())
        throw ValidationError("lp: A_ie rows and b_ie size differ");
    if (A_eq.rows() > 0 && A_eq.cols() != n)
        throw ValidationError("lp: A_eq column count must equal f size");
    if (A_ie.rows() > 0 && A_ie.cols() != n)
        throw ValidationError("lp: A_ie column count must equal f size");
}

double LpSolution::dual_objective(const LinearProgram& lp) const {
    double v = 0.0;
    if (lp.b_eq.size() > 0) v += lp.b_eq.dot(lambda);
    if (lp.b_ie.size() > 0) v -= lp.b_ie.dot(mu);
    return v;
}

double LpSolution::stationarity_residual(const LinearProgram& lp) const {
    VectorXd r = lp.f;
    if (lp.A_eq.rows() > 0) r -= lp.A_eq.transpose() * lambda;
    if (lp.A_ie.rows() > 0) r += lp.A_ie.transpose() * mu;
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

namespace {

struct EqReduction {
    MatrixXd A;                 // kept rows, full row rank
    VectorXd b;
    std::vector<int> kept;      // original row indices
    std::vector<int> dropped;
};

// Select a maximal independent subset of equality rows by modified
// Gram-Schmidt in index order; verify the dropped rows are consistent and
// otherwise raise an equality-only Farkas certificate.
EqReduction reduce_equalities(const LinearProgram& lp, double tol) {
    EqReduction red;
    const Index me = lp.A_eq.rows();
    const Index n = lp.num_vars();
    if (me == 0) {
        red.A.resize(0, n);
        red.b.resize(0);
        return red;
    }

    MatrixXd Q(n, std::min(me, n)); // orthonormal span of kept rows
    Index q = 0;
    for (Index i = 0; i < me; ++i) {
        VectorXd a = lp.A_eq.row(i).transpose();
        double norm0 = a.norm();
        VectorXd r = a;
        if (q > 0) r -= Q.leftCols(q) * (Q.leftCols(q).transpose() * a);
        if (q > 0) r -= Q.leftCols(q) * (Q.leftCols(q).transpose() * r); // re-orthogonalize
        if (r.norm() > 1e-12 * (1.0 + norm0) && q < n) {
            Q.col(q++) = r.normalized();
            red.kept.push_back(static_cast<int>(i));
        } else {
            red.dropped.push_back(static_cast<int>(i));
        }
    }

    red.A.resize(static_cast<Index>(red.kept.size()), n);
    red.b.resize(static_cast<Index>(red.kept.size()));
    for (std::size_t i = 0; i < red.kept.size(); ++i) {
        red.A.row(static_cast<Index>(i)) = lp.A_eq.row(red.kept[i]);
        red.b(static_cast<Index>(i)) = lp.b_eq(red.kept[i]);
    }

    // Dropped rows must be implied: a_i = A_kept' c  ->  b_i must equal c' b_kept.
    if (!red.dropped.empty()) {
        auto AkT = red.A.transpose();
        Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(AkT);
        for (int i : red.dropped) {
            VectorXd c = cod.solve(lp.A_eq.row(i).transpose());
            double implied = c.dot(red.b);
            double scale = 1.0 + std::abs(lp.b_eq(i)) + std::abs(implied);
            if (std::abs(lp.b_eq(i) - implied) > 1e3 * tol * scale) {
                VectorXd eq_ray = VectorXd::Zero(me);
                eq_ray(i) = 1.0;
                for (std::size_t k = 0; k < red.kept.size(); ++k)
                    eq_ray(red.kept[k]) = -c(static_cast<Index>(k));
                if (lp.b_eq.dot(eq_ray) > 0) eq_ray = -eq_ray;
                throw InfeasibleError("lp: inconsistent equality system", eq_ray,
                                      VectorXd::Zero(lp.A_ie.rows()));
            }
        }
    }
    return red;
}

class ActiveSetSolver {
public:
    ActiveSetSolver(const LinearProgram& lp, const EqReduction& eq, const LpOptions& opt,
                    const std::vector<int>& hint)
        : lp_(lp), eq_(eq), opt_(opt), n_(lp.num_vars()),
          r_(static_cast<Index>(eq.kept.size())), mi_(lp.A_ie.rows()) {
        row_scale_.resize(mi_);
        ignored_.assign(static_cast<std::size_t>(mi_), false);
        for (Index j = 0; j < mi_; ++j) {
            double norm = lp.A_ie.row(j).cwiseAbs().maxCoeff();
            row_scale_(j) = 1.0 + norm;
            if (norm <= 1e-300) {
                if (lp.b_ie(j) < -opt.feas_tol) {
                    VectorXd ie = VectorXd::Zero(mi_);
                    ie(j) = 1.0;
                    throw InfeasibleError("lp: inequality row " + std::to_string(j) +
                                              " has zero coefficients and negative bound",
                                          VectorXd::Zero(lp.A_eq.rows()), ie);
                }
                ignored_[static_cast<std::size_t>(j)] = true;
            }
        }
        max_pivots_ = opt.max_pivots > 0
                          ? opt.max_pivots
                          : std::max<long>(20000, 200L * static_cast<long>(n_ + mi_));
        init_working_set(hint);
    }

    LpSolution solve() {
        if (r_ == n_) return solve_fully_pinned();
        phase1();
        phase2();
        return extract();
    }

private:
    const LinearProgram& lp_;
    const EqReduction& eq_;
    const LpOptions& opt_;
    Index n_, r_, mi_;
    VectorXd row_scale_;
    std::vector<bool> ignored_;
    long max_pivots_;
    long pivots_ = 0;
    int stall_run_ = 0;
    bool bland_ = false;
    int since_refactor_ = 0;

    std::vector<int> work_;      // inequality rows in slots r_..n_-1
    std::vector<char> in_work_;  // per inequality row
    MatrixXd Minv_;
    VectorXd x_;

    MatrixXd working_matrix() const {
        MatrixXd M(n_, n_);
        if (r_ > 0) M.topRows(r_) = eq_.A;
        for (std::size_t i = 0; i < work_.size(); ++i)
            M.row(r_ + static_cast<Index>(i)) = lp_.A_ie.row(work_[i]);
        return M;
    }

    VectorXd working_rhs() const {
        VectorXd b(n_);
        if (r_ > 0) b.head(r_) = eq_.b;
        for (std::size_t i = 0; i < work_.size(); ++i)
            b(r_ + static_cast<Index>(i)) = lp_.b_ie(work_[i]);
        return b;
    }

    void refactor() {
        Eigen::FullPivLU<MatrixXd> lu(working_matrix());
        if (!lu.isInvertible())
            throw NumericalFailure("lp: working-set matrix became singular");
        Minv_ = lu.inverse();
        x_ = Minv_ * working_rhs();
        since_refactor_ = 0;
    }

    // Greedy independent-row selection. Equality rows are forced; hint rows
    // are preferred, then single-nonzero rows (variable bounds), then the
    // rest in index order.
    void init_working_set(const std::vector<int>& hint) {
        work_.clear();
        in_work_.assign(static_cast<std::size_t>(mi_), 0);

        MatrixXd Q(n_, n_);
        Index q = 0;
        auto try_add = [&](const VectorXd& a) {
            if (q >= n_) return false;
            VectorXd res = a;
            if (q > 0) res -= Q.leftCols(q) * (Q.leftCols(q).transpose() * a);
            if (q > 0) res -= Q.leftCols(q) * (Q.leftCols(q).transpose() * res);
            if (res.norm() <= 1e-10 * (1.0 + a.norm())) return false;
            Q.col(q++) = res.normalized();
            return true;
        };
        for (Index i = 0; i < r_; ++i) try_add(eq_.A.row(i).transpose());

        auto consider_row = [&](int j) {
            if (q >= n_) return;
            if (j < 0 || j >= mi_) return;
            if (in_work_[static_cast<std::size_t>(j)] || ignored_[static_cast<std::size_t>(j)]) return;
            if (try_add(lp_.A_ie.row(j).transpose())) {
                work_.push_back(j);
                in_work_[static_cast<std::size_t>(j)] = 1;
            }
        };

        for (int j : hint) consider_row(j);
        if (q < n_) {
            std::vector<int> singles, rest;
            for (Index j = 0; j < mi_; ++j) {
                if (in_work_[static_cast<std::size_t>(j)] || ignored_[static_cast<std::size_t>(j)])
                    continue;
                int nnz = 0;
                for (Index v = 0; v < n_ && nnz < 2; ++v)
                    if (lp_.A_ie(j, v) != 0.0) ++nnz;
                (nnz == 1 ? singles : rest).push_back(static_cast<int>(j));
            }
            for (int j : singles) consider_row(j);
            for (int j : rest) consider_row(j);
        }
        if (q < n_)
            throw NumericalFailure("lp: constraint rows do not span the variable space "
                                   "(feasible set has no vertex)");
        refactor();
    }

    void replace_row(std::size_t slot_ineq, int row_new) {
        int row_old = work_[slot_ineq];
        Index slot = r_ + static_cast<Index>(slot_ineq);
        VectorXd v = (lp_.A_ie.row(row_new) - lp_.A_ie.row(row_old)).transpose();
        VectorXd u = Minv_.col(slot);
        Eigen::RowVectorXd z = v.transpose() * Minv_;
        double denom = 1.0 + z(slot);
        in_work_[static_cast<std::size_t>(row_old)] = 0;
        work_[slot_ineq] = row_new;
        in_work_[static_cast<std::size_t>(row_new)] = 1;
        if (std::abs(denom) < 1e-10 || ++since_refactor_ >= opt_.refactor_every) {
            refactor();
        } else {
            Minv_.noalias() -= (u / denom) * z;
        }
    }

    void count_pivot(double step_norm) {
        ++pivots_;
        if (pivots_ > max_pivots_)
            throw NumericalFailure("lp: pivot limit exceeded");
        if (step_norm <= 1e-12 * (1.0 + x_.cwiseAbs().maxCoeff())) {
            if (++stall_run_ > opt_.bland_after_stalls) bland_ = true;
        } else {
            stall_run_ = 0;
            bland_ = false;
        }
    }

    VectorXd slacks() const { return lp_.b_ie - lp_.A_ie * x_; }

    // ---- phase 1: minimize total violation --------------------------------

    void phase1() {
        for (;;) {
            VectorXd s = slacks();
            std::vector<int> violated;
            double worst = 0.0;
            for (Index j = 0; j < mi_; ++j) {
                if (ignored_[static_cast<std::size_t>(j)] || in_work_[static_cast<std::size_t>(j)])
                    continue;
                if (s(j) < -opt_.feas_tol * row_scale_(j)) {
                    violated.push_back(static_cast<int>(j));
                    worst = std::max(worst, -s(j));
                }
            }
            if (violated.empty()) return;

            VectorXd g = VectorXd::Zero(n_);
            for (int j : violated) g += lp_.A_ie.row(j).transpose();
            VectorXd y = Minv_.transpose() * g;

            // Pivot selection: drop (rate -y) or cross (rate y + 1).
            int slot_pick = -1;
            bool cross = false;
            double best_rate = -opt_.dual_tol;
            for (std::size_t i = 0; i < work_.size(); ++i) {
                double yi = y(r_ + static_cast<Index>(i));
                double drop_rate = -yi;
                double cross_rate = yi + 1.0;
                if (bland_) {
                    if (drop_rate < -opt_.dual_tol) { slot_pick = static_cast<int>(i); cross = false; break; }
                    if (cross_rate < -opt_.dual_tol) { slot_pick = static_cast<int>(i); cross = true; break; }
                } else {
                    if (drop_rate < best_rate) { best_rate = drop_rate; slot_pick = static_cast<int>(i); cross = false; }
                    if (cross_rate < best_rate) { best_rate = cross_rate; slot_pick = static_cast<int>(i); cross = true; }
                }
            }

            if (slot_pick < 0) {
                // Phase-1 optimum with positive violation: infeasible.
                VectorXd ie_ray = VectorXd::Zero(mi_);
                for (int j : violated) ie_ray(j) = 1.0;
                for (std::size_t i = 0; i < work_.size(); ++i)
                    ie_ray(work_[i]) = std::max(0.0, -y(r_ + static_cast<Index>(i)));
                VectorXd eq_ray = VectorXd::Zero(lp_.A_eq.rows());
                for (std::size_t i = 0; i < eq_.kept.size(); ++i)
                    eq_ray(eq_.kept[i]) = -y(static_cast<Index>(i));
                throw InfeasibleError("lp: infeasible (residual " + std::to_string(worst) + ")",
                                      eq_ray, ie_ray);
            }

            Index slot = r_ + slot_pick;
            VectorXd d = cross ? VectorXd(Minv_.col(slot)) : VectorXd(-Minv_.col(slot));
            double rate = g.dot(d) + (cross ? 1.0 : 0.0);
            if (rate >= 0) { // numerical disagreement with the pricing step
                refactor();
                continue;
            }

            // Piecewise line search over breakpoints where rows enter/leave
            // the violated set.
            VectorXd p = lp_.A_ie * d;
            struct Breakpoint { double alpha; double slope_delta; int row; };
            std::vector<Breakpoint> bps;
            for (Index j = 0; j < mi_; ++j) {
                if (ignored_[static_cast<std::size_t>(j)] || in_work_[static_cast<std::size_t>(j)])
                    continue;
                double ptol = 1e-11 * row_scale_(j);
                bool viol = s(j) < -opt_.feas_tol * row_scale_(j);
                if (!viol && p(j) > ptol) {
                    double alpha = std::max(s(j), 0.0) / p(j);
                    bps.push_back({alpha, p(j), static_cast<int>(j)});
                } else if (viol && p(j) < -ptol) {
                    bps.push_back({s(j) / p(j), -p(j), static_cast<int>(j)});
                }
            }
            if (cross) { // the crossed row becomes violated immediately
                // handled via the +1 in `rate`; it re-enters the candidate
                // pool on the next iteration.
            }
            std::sort(bps.begin(), bps.end(), [](const Breakpoint& a, const Breakpoint& b) {
                if (a.alpha != b.alpha) return a.alpha < b.alpha;
                return a.row < b.row;
            });
            if (bps.empty())
                throw NumericalFailure("lp: phase-1 descent with no breakpoints");

            double slope = rate;
            std::size_t stop = 0;
            for (; stop < bps.size(); ++stop) {
                slope += bps[stop].slope_delta;
                if (slope >= -1e-14 * (1.0 + std::abs(rate))) break;
            }
            if (stop == bps.size())
                throw NumericalFailure("lp: phase-1 line search failed to terminate");

            double alpha = bps[stop].alpha;
            int enter = bps[stop].row;
            // Deterministic choice among ties at the stopping breakpoint.
            for (std::size_t i = 0; i + 1 <= stop; ++i)
                if (bps[stop].alpha - bps[i].alpha <= 1e-14 * (1.0 + bps[stop].alpha))
                    enter = std::min(enter, bps[i].row);

            x_ += alpha * d;
            replace_row(static_cast<std::size_t>(slot_pick), enter);
            count_pivot(alpha * d.cwiseAbs().maxCoeff());
        }
    }

    // ---- phase 2: minimize f'x over the feasible region --------------------

    void phase2() {
        int repair_attempts = 0;
        for (;;) {
            VectorXd y = Minv_.transpose() * lp_.f;

            int slot_pick = -1;
            double best = opt_.dual_tol;
            for (std::size_t i = 0; i < work_.size(); ++i) {
                double yi = y(r_ + static_cast<Index>(i));
                if (yi > best) {
                    best = yi;
                    slot_pick = static_cast<int>(i);
                    if (bland_) break;
                }
            }
            if (slot_pick < 0) return; // dual feasible: optimal

            Index slot = r_ + slot_pick;
            VectorXd d = -Minv_.col(slot);
            VectorXd p = lp_.A_ie * d;
            VectorXd s = slacks();

            int enter = -1;
            double alpha = 0.0;
            for (Index j = 0; j < mi_; ++j) {
                if (ignored_[static_cast<std::size_t>(j)] || in_work_[static_cast<std::size_t>(j)])
                    continue;
                if (p(j) > 1e-11 * row_scale_(j)) {
                    double aj = std::max(s(j), 0.0) / p(j);
                    double tie = 1e-14 * (1.0 + alpha);
                    if (enter < 0 || aj < alpha - tie ||
                        (aj <= alpha + tie && static_cast<int>(j) < enter)) {
                        alpha = aj;
                        enter = static_cast<int>(j);
                    }
                }
            }
            if (enter < 0) {
                double fd = lp_.f.dot(d);
                if (fd < -1e-12 * (1.0 + lp_.f.cwiseAbs().maxCoeff()))
                    throw UnboundedError("lp: objective unbounded below", d);
                // Flat unblocked direction under a zero-weight objective
                // block: treat as optimal at the current vertex.
                if (++repair_attempts > 4)
                    throw NumericalFailure("lp: flat ray handling failed");
                return;
            }

            x_ += alpha * d;
            replace_row(static_cast<std::size_t>(slot_pick), enter);
            count_pivot(alpha * d.cwiseAbs().maxCoeff());
        }
    }

    // ---- r == n: the equalities pin x completely ---------------------------

    LpSolution solve_fully_pinned() {
        Eigen::FullPivLU<MatrixXd> lu(eq_.A);
        if (!lu.isInvertible())
            throw NumericalFailure("lp: reduced equality system singular");
        VectorXd x = lu.solve(eq_.b);
        x += lu.solve(eq_.b - eq_.A * x);
        for (Index j = 0; j < mi_; ++j) {
            if (ignored_[static_cast<std::size_t>(j)]) continue;
            double viol = lp_.A_ie.row(j).dot(x) - lp_.b_ie(j);
            if (viol > opt_.feas_tol * row_scale_(j)) {
                Eigen::FullPivLU<MatrixXd> luT(MatrixXd(eq_.A.transpose()));
                VectorXd c = luT.solve(lp_.A_ie.row(j).transpose());
                VectorXd eq_ray = VectorXd::Zero(lp_.A_eq.rows());
                for (std::size_t i = 0; i < eq_.kept.size(); ++i)
                    eq_ray(eq_.kept[i]) = -c(static_cast<Index>(i));
                VectorXd ie_ray = VectorXd::Zero(mi_);
                ie_ray(j) = 1.0;
                throw InfeasibleError("lp: infeasible (pinned point violates row " +
                                          std::to_string(j) + ")",
                                      eq_ray, ie_ray);
            }
        }
        x_ = x;
        work_.clear();
        return extract();
    }

    LpSolution extract() {
        LpSolution sol;
        // Fresh factorization plus one refinement step for the final values.
        MatrixXd M = working_matrix();
        Eigen::PartialPivLU<MatrixXd> lu(M);
        VectorXd rhs = working_rhs();
        VectorXd x = lu.solve(rhs);
        x += lu.solve(rhs - M * x);
        Eigen::PartialPivLU<MatrixXd> luT(MatrixXd(M.transpose()));
        VectorXd y = luT.solve(lp_.f);
        y += luT.solve(lp_.f - M.transpose() * y);

        sol.x = x;
        sol.lambda = VectorXd::Zero(lp_.A_eq.rows());
        for (std::size_t i = 0; i < eq_.kept.size(); ++i)
            sol.lambda(eq_.kept[i]) = y(static_cast<Index>(i));
        sol.mu = VectorXd::Zero(mi_);
        for (std::size_t i = 0; i < work_.size(); ++i)
            sol.mu(work_[i]) = -y(r_ + static_cast<Index>(i));
        sol.basis.assign(work_.begin(), work_.end());
        std::sort(sol.basis.begin(), sol.basis.end());
        sol.dropped_equalities = eq_.dropped;
        VectorXd s = lp_.b_ie - lp_.A_ie * x;
        for (Index j = 0; j < mi_; ++j)
            if (!ignored_[static_cast<std::size_t>(j)] &&
                std::abs(s(j)) <= opt_.active_tol * row_scale_(j))
                sol.active_set.push_back(static_cast<int>(j));
        sol.objective = lp_.f.dot(x);
        sol.pivots = pivots_;
        return sol;
    }
};

// Equality-constrained LP without inequalities and without a vertex
// (rank(A_eq) < n): either unbounded or flat over the feasible affine set.
LpSolution solve_equality_only(const LinearProgram& lp, const EqReduction& eq, double tol) {
    const Index n = lp.num_vars();
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(eq.A);
    VectorXd x = cod.solve(eq.b);
    if (eq.A.rows() > 0 && (eq.A * x - eq.b).cwiseAbs().maxCoeff() > 1e3 * tol)
        throw NumericalFailure("lp: equality system solve failed");
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> codT(MatrixXd(eq.A.transpose()));
    VectorXd lam = codT.solve(lp.f);
    VectorXd resid = lp.f - eq.A.transpose() * lam;
    if (resid.size() == 0) resid = lp.f;
    if (resid.cwiseAbs().maxCoeff() > 1e-9 * (1.0 + lp.f.cwiseAbs().maxCoeff()))
        throw UnboundedError("lp: unbounded (no inequality constraints bind the objective)",
                             -resid);
    LpSolution sol;
    sol.x = x;
    sol.lambda = VectorXd::Zero(lp.A_eq.rows());
    for (std::size_t i = 0; i < eq.kept.size(); ++i)
        sol.lambda(eq.kept[i]) = lam(static_cast<Index>(i));
    sol.mu = VectorXd::Zero(lp.A_ie.rows());
    sol.dropped_equalities = eq.dropped;
    sol.objective = lp.f.dot(x);
    (void)n;
    return sol;
}

} // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opt,
                    const std::vector<int>& basis_hint) {
    lp.check_dimensions();
    if (lp.num_vars() == 0) throw ValidationError("lp: no variables");

    EqReduction eq = reduce_equalities(lp, opt.feas_tol);
    const Index r = static_cast<Index>(eq.kept.size());

    bool any_real_row = false;
    for (Index j = 0; j < lp.A_ie.rows(); ++j)
        if (lp.A_ie.row(j).cwiseAbs().maxCoeff() > 1e-300) { any_real_row = true; break; }
    if (!any_real_row && r < lp.num_vars()) {
        // No usable inequalities: flat or unbounded over the affine set.
        for (Index j = 0; j < lp.A_ie.rows(); ++j)
            if (lp.b_ie(j) < -opt.feas_tol) {
                Eigen::VectorXd ie = Eigen::VectorXd::Zero(lp.A_ie.rows());
                ie(j) = 1.0;
                throw InfeasibleError("lp: zero row with negative bound",
                                      Eigen::VectorXd::Zero(lp.A_eq.rows()), ie);
            }
        return solve_equality_only(lp, eq, opt.feas_tol);
    }

    ActiveSetSolver solver(lp, eq, opt, basis_hint);
    return solver.solve();
}

} // namespace cted
