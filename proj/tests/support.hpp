#pragma once

// Shared test oracles. Everything here is intentionally independent of the
// implementation paths it checks: brute-force vertex enumeration for small
// LPs, quadrature for integrals, dense scans for roots and crossings.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cted/lp.hpp"
#include "cted/model.hpp"

namespace testsupport {

struct BruteLpResult {
    bool feasible = false;
    double objective = 0.0;
    Eigen::VectorXd x;
};

// Enumerate every working-set combination (all equalities plus n - me
// inequality rows), keep feasible vertices, return the best. Only sensible
// for tiny instances.
inline BruteLpResult brute_force_lp(const cted::LinearProgram& lp, double tol = 1e-7) {
    const Eigen::Index n = lp.num_vars();
    const Eigen::Index me = lp.A_eq.rows();
    const Eigen::Index mi = lp.A_ie.rows();
    BruteLpResult best;

    std::vector<int> combo;
    std::function<void(int, int)> rec = [&](int start, int need) {
        if (need == 0) {
            Eigen::MatrixXd M(n, n);
            Eigen::VectorXd b(n);
            for (Eigen::Index i = 0; i < me; ++i) {
                M.row(i) = lp.A_eq.row(i);
                b(i) = lp.b_eq(i);
            }
            for (std::size_t i = 0; i < combo.size(); ++i) {
                M.row(me + static_cast<Eigen::Index>(i)) = lp.A_ie.row(combo[i]);
                b(me + static_cast<Eigen::Index>(i)) = lp.b_ie(combo[i]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
            if (!lu.isInvertible()) return;
            Eigen::VectorXd x = lu.solve(b);
            if (me > 0 && (lp.A_eq * x - lp.b_eq).cwiseAbs().maxCoeff() > tol) return;
            for (Eigen::Index j = 0; j < mi; ++j)
                if (lp.A_ie.row(j).dot(x) > lp.b_ie(j) + tol * (1.0 + std::abs(lp.b_ie(j))))
                    return;
            double obj = lp.f.dot(x);
            if (!best.feasible || obj < best.objective - 1e-12) {
                best.feasible = true;
                best.objective = obj;
                best.x = x;
            }
            return;
        }
        for (int j = start; j <= static_cast<int>(mi) - need; ++j) {
            combo.push_back(j);
            rec(j + 1, need - 1);
            combo.pop_back();
        }
    };
    int need = static_cast<int>(n - me);
    if (need < 0) return best;
    rec(0, need);
    return best;
}

// Full KKT audit of a solution under the library's sign convention.
struct KktReport {
    double eq_residual = 0.0;
    double ie_violation = 0.0;
    double min_mu = 0.0;
    double comp_slackness = 0.0;
    double stationarity = 0.0;
    double duality_gap = 0.0;
};

inline KktReport kkt_report(const cted::LinearProgram& lp, const cted::LpSolution& sol) {
    KktReport r;
    if (lp.A_eq.rows() > 0)
        r.eq_residual = (lp.A_eq * sol.x - lp.b_eq).cwiseAbs().maxCoeff();
    if (lp.A_ie.rows() > 0) {
        Eigen::VectorXd s = lp.b_ie - lp.A_ie * sol.x;
        r.ie_violation = std::max(0.0, (-s).maxCoeff());
        r.min_mu = sol.mu.minCoeff();
        r.comp_slackness = (sol.mu.array() * s.array()).abs().maxCoeff();
    }
    r.stationarity = sol.stationarity_residual(lp);
    r.duality_gap = std::abs(sol.objective - sol.dual_objective(lp));
    return r;
}

// Random bounded LP: a box plus extra random rows, feasible by construction
// (a witness point is sampled first).
inline cted::LinearProgram random_lp(std::mt19937& rng, int n, int me, int extra_rows) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.2, 2.0);
    cted::LinearProgram lp;
    lp.f.resize(n);
    for (int i = 0; i < n; ++i) lp.f(i) = gauss(rng);
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0(i) = gauss(rng);

    lp.A_eq.resize(me, n);
    lp.b_eq.resize(me);
    for (int i = 0; i < me; ++i) {
        for (int j = 0; j < n; ++j) lp.A_eq(i, j) = gauss(rng);
        lp.b_eq(i) = lp.A_eq.row(i).dot(x0);
    }

    const double box = 10.0;
    int rows = 2 * n + extra_rows;
    lp.A_ie = Eigen::MatrixXd::Zero(rows, n);
    lp.b_ie.resize(rows);
    int r = 0;
    for (int i = 0; i < n; ++i) {
        lp.A_ie(r, i) = 1.0;
        lp.b_ie(r++) = std::abs(x0(i)) + box;
        lp.A_ie(r, i) = -1.0;
        lp.b_ie(r++) = std::abs(x0(i)) + box;
    }
    for (int i = 0; i < extra_rows; ++i) {
        for (int j = 0; j < n; ++j) lp.A_ie(r, j) = gauss(rng);
        lp.b_ie(r) = lp.A_ie.row(r).dot(x0) + uni(rng);
        ++r;
    }
    return lp;
}

// Composite Simpson quadrature, the integral oracle.
inline double simpson(const std::function<double(double)>& f, double a, double b, int cells) {
    double h = (b - a) / (2.0 * cells);
    double acc = f(a) + f(b);
    for (int i = 1; i < 2 * cells; ++i) acc += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// Synthetic dispatch system with an ascending merit order and a load profile
// rescaled into a comfortably feasible band.
inline cted::System make_random_system(int units, int degree, unsigned seed,
                                       double ramp_tightness = 0.6) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    std::vector<cted::Unit> us;
    double cost = 18.0;
    for (int k = 0; k < units; ++k) {
        cted::Unit u;
        u.id = "G" + std::to_string(k + 1);
        cost += 2.0 + 6.0 * uni(rng);
        u.marginal_cost = cost;
        u.g_min = 20.0 + 30.0 * uni(rng);
        u.g_max = u.g_min + 150.0 + 150.0 * uni(rng);
        u.ramp_up = 1.0 + 4.0 * uni(rng);
        u.ramp_down_mag = 1.0 + 4.0 * uni(rng);
        us.push_back(u);
    }
    double sum_min = 0, sum_max = 0, sum_ramp = 0;
    for (const auto& u : us) {
        sum_min += u.g_min;
        sum_max += u.g_max;
        sum_ramp += std::min(u.ramp_up, u.ramp_down_mag);
    }

    // Raw polynomial, then rescale values into the feasible band and cap the
    // derivative against the aggregate ramp capability.
    std::vector<double> raw(static_cast<std::size_t>(degree) + 1, 0.0);
    for (int i = 1; i <= degree; ++i)
        raw[static_cast<std::size_t>(i)] = (uni(rng) - 0.5) / std::pow(40.0, i - 1);
    cted::Polynomial p(raw);
    double lo = p.eval(0), hi = lo, dmax = 0.0;
    for (double t = 0; t <= 60.0; t += 0.05) {
        lo = std::min(lo, p.eval(t));
        hi = std::max(hi, p.eval(t));
        dmax = std::max(dmax, std::abs(p.derivative().eval(t)));
    }
    double band_lo = sum_min + 0.15 * (sum_max - sum_min);
    double band_hi = sum_min + 0.85 * (sum_max - sum_min);
    double scale = (hi > lo) ? (band_hi - band_lo) / (hi - lo) : 0.0;
    if (scale * dmax > ramp_tightness * sum_ramp && dmax > 0)
        scale = ramp_tightness * sum_ramp / dmax;
    std::vector<double> coef = p.scaled(scale).coefficients();
    double mid_target = 0.5 * (band_lo + band_hi);
    double mid_now = 0.5 * (scale * (hi + lo));
    coef[0] += mid_target - mid_now;

    return cted::System(std::move(us), cted::LoadProfile(coef, 0.0, 60.0));
}

} // namespace testsupport
