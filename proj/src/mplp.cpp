#include "cted/mplp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "cted/errors.hpp"
#include "cted/numfmt.hpp"

namespace cted {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

void ParametricLP::check_dimensions() const {
    if (E_eq.rows() != A_eq.rows() || (E_eq.rows() > 0 && E_eq.cols() != 2))
        throw ValidationError("plp: E_eq must be (rows of A_eq) x 2");
    if (E_ie.rows() != A_ie.rows() || (E_ie.rows() > 0 && E_ie.cols() != 2))
        throw ValidationError("plp: E_ie must be (rows of A_ie) x 2");
    LinearProgram probe{f, A_eq, b_eq, A_ie, b_ie};
    probe.check_dimensions();
    if (!(theta_lo.x() < theta_hi.x()) || !(theta_lo.y() < theta_hi.y()))
        throw ValidationError("plp: theta domain box is empty");
}

LinearProgram ParametricLP::instantiate(const Vector2d& theta) const {
    LinearProgram lp;
    lp.f = f;
    lp.A_eq = A_eq;
    lp.b_eq = b_eq + E_eq * theta;
    lp.A_ie = A_ie;
    lp.b_ie = b_ie + E_ie * theta;
    return lp;
}

bool ParametricLP::in_domain(const Vector2d& theta, double tol) const {
    double st = tol * (1.0 + theta_hi.cwiseAbs().maxCoeff());
    return theta.x() >= theta_lo.x() - st && theta.x() <= theta_hi.x() + st &&
           theta.y() >= theta_lo.y() - st && theta.y() <= theta_hi.y() + st;
}

bool CriticalRegion::contains(const Vector2d& theta, double tol) const {
    // Halfspace normals are unit length, so the residual is a signed
    // distance in theta-space and the tolerance is absolute.
    for (const Halfspace& h : halfspaces) {
        double lhs = h.c_t * theta.x() + h.c_D * theta.y();
        if (lhs > h.d + tol) return false;
    }
    return true;
}

VectorXd CriticalRegion::primal(const Vector2d& theta) const {
    return A_x * theta + B_x;
}

VectorXd CriticalRegion::equality_duals(const Vector2d& theta) const {
    return A_lam * theta + B_lam;
}

std::vector<Vector2d> CriticalRegion::vertices(double tol) const {
    std::vector<Vector2d> vs;
    const auto& hs = halfspaces;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        for (std::size_t j = i + 1; j < hs.size(); ++j) {
            double det = hs[i].c_t * hs[j].c_D - hs[i].c_D * hs[j].c_t;
            double scale = std::abs(hs[i].c_t) + std::abs(hs[i].c_D) +
                           std::abs(hs[j].c_t) + std::abs(hs[j].c_D);
            if (std::abs(det) <= 1e-12 * scale * scale) continue;
            Vector2d p((hs[i].d * hs[j].c_D - hs[i].c_D * hs[j].d) / det,
                       (hs[i].c_t * hs[j].d - hs[i].d * hs[j].c_t) / det);
            if (!contains(p, tol)) continue;
            bool dup = false;
            for (const auto& q : vs)
                if ((q - p).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + p.cwiseAbs().maxCoeff())) {
                    dup = true;
                    break;
                }
            if (!dup) vs.push_back(p);
        }
    }
    return vs;
}

namespace {

double domain_scale(const ParametricLP& plp) {
    return 1.0 + plp.theta_hi.cwiseAbs().maxCoeff() + plp.theta_lo.cwiseAbs().maxCoeff();
}

// Chebyshev center of the halfspace set: max rho s.t. c'p + |c| rho <= d.
struct ChebyshevResult {
    Vector2d center;
    double radius;
};

ChebyshevResult chebyshev_center(const std::vector<Halfspace>& hs, const LpOptions& lpopt) {
    LinearProgram lp;
    lp.f = Eigen::Vector3d(0, 0, -1.0);
    lp.A_eq.resize(0, 3);
    lp.b_eq.resize(0);
    lp.A_ie.resize(static_cast<Index>(hs.size()), 3);
    lp.b_ie.resize(static_cast<Index>(hs.size()));
    for (std::size_t i = 0; i < hs.size(); ++i) {
        double nrm = std::hypot(hs[i].c_t, hs[i].c_D);
        lp.A_ie.row(static_cast<Index>(i)) << hs[i].c_t, hs[i].c_D, nrm;
        lp.b_ie(static_cast<Index>(i)) = hs[i].d;
    }
    LpSolution sol = solve_lp(lp, lpopt);
    return {Vector2d(sol.x(0), sol.x(1)), sol.x(2)};
}

// Normalize, merge duplicates (keeping the tighter bound), then remove
// redundant halfspaces by maximizing each candidate subject to the rest.
std::vector<Halfspace> tidy_halfspaces(std::vector<Halfspace> hs, const LpOptions& lpopt,
                                       double scale) {
    std::vector<Halfspace> norm;
    for (const Halfspace& h : hs) {
        double n = std::hypot(h.c_t, h.c_D);
        if (n <= 1e-14) continue; // trivially satisfied rows were screened earlier
        norm.push_back({h.c_t / n, h.c_D / n, h.d / n});
    }
    // Duplicate directions: same (c_t, c_D) within 1e-9; keep smallest d.
    std::map<std::pair<long long, long long>, std::size_t> seen;
    std::vector<Halfspace> merged;
    auto key = [](double v) { return static_cast<long long>(std::llround(v * 1e9)); };
    for (const Halfspace& h : norm) {
        auto k = std::make_pair(key(h.c_t), key(h.c_D));
        auto it = seen.find(k);
        if (it == seen.end()) {
            seen.emplace(k, merged.size());
            merged.push_back(h);
        } else if (h.d < merged[it->second].d) {
            merged[it->second].d = h.d;
        }
    }

    // Iterative redundancy removal by LP.
    std::vector<bool> kept(merged.size(), true);
    for (std::size_t i = 0; i < merged.size(); ++i) {
        LinearProgram lp;
        lp.f = -Eigen::Vector2d(merged[i].c_t, merged[i].c_D);
        lp.A_eq.resize(0, 2);
        lp.b_eq.resize(0);
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < merged.size(); ++j)
            if (j != i && kept[j]) others.push_back(j);
        lp.A_ie.resize(static_cast<Index>(others.size()), 2);
        lp.b_ie.resize(static_cast<Index>(others.size()));
        for (std::size_t r = 0; r < others.size(); ++r) {
            lp.A_ie.row(static_cast<Index>(r)) << merged[others[r]].c_t, merged[others[r]].c_D;
            lp.b_ie(static_cast<Index>(r)) = merged[others[r]].d;
        }
        try {
            LpSolution sol = solve_lp(lp, lpopt);
            double best = -sol.objective; // max of c_i' theta over the others
            if (best <= merged[i].d + 1e-9 * (1.0 + std::abs(merged[i].d) + scale))
                kept[i] = false;
        } catch (const UnboundedError&) {
            // unbounded without this halfspace: definitely not redundant
        } catch (const InfeasibleError&) {
            kept[i] = true;
        }
    }
    std::vector<Halfspace> out;
    for (std::size_t i = 0; i < merged.size(); ++i)
        if (kept[i]) out.push_back(merged[i]);
    return out;
}

CriticalRegion build_region_once(const ParametricLP& plp, const Vector2d& theta0,
                                 const MplpOptions& opt) {
    if (!plp.in_domain(theta0, opt.contain_tol))
        throw InfeasiblePoint("theta outside the parameter domain");

    LpSolution sol;
    try {
        sol = solve_lp(plp.instantiate(theta0), opt.lp);
    } catch (const InfeasibleError&) {
        throw InfeasiblePoint("parametric LP infeasible at theta");
    }

    const Index n = plp.f.size();
    const Index me = plp.A_eq.rows();
    std::vector<int> kept_eq;
    for (Index i = 0; i < me; ++i)
        if (std::find(sol.dropped_equalities.begin(), sol.dropped_equalities.end(),
                      static_cast<int>(i)) == sol.dropped_equalities.end())
            kept_eq.push_back(static_cast<int>(i));
    const Index r = static_cast<Index>(kept_eq.size());
    const Index nb = static_cast<Index>(sol.basis.size());
    if (r + nb != n)
        throw DegenerateRegion("active-set KKT system is not square");

    MatrixXd M(n, n), E(n, 2);
    VectorXd b(n);
    for (Index i = 0; i < r; ++i) {
        M.row(i) = plp.A_eq.row(kept_eq[static_cast<std::size_t>(i)]);
        E.row(i) = plp.E_eq.row(kept_eq[static_cast<std::size_t>(i)]);
        b(i) = plp.b_eq(kept_eq[static_cast<std::size_t>(i)]);
    }
    for (Index i = 0; i < nb; ++i) {
        int j = sol.basis[static_cast<std::size_t>(i)];
        M.row(r + i) = plp.A_ie.row(j);
        E.row(r + i) = plp.E_ie.row(j);
        b(r + i) = plp.b_ie(j);
    }
    Eigen::FullPivLU<MatrixXd> lu(M);
    if (!lu.isInvertible())
        throw DegenerateRegion("active-set KKT matrix singular");

    CriticalRegion reg;
    reg.active_set = sol.basis;
    reg.A_x = lu.solve(E);
    reg.B_x = lu.solve(b);

    Eigen::FullPivLU<MatrixXd> luT(MatrixXd(M.transpose()));
    VectorXd y = luT.solve(plp.f);
    reg.A_lam = MatrixXd::Zero(me, 2);
    reg.B_lam = VectorXd::Zero(me);
    for (Index i = 0; i < r; ++i) reg.B_lam(kept_eq[static_cast<std::size_t>(i)]) = y(i);
    reg.A_mu = MatrixXd::Zero(nb, 2);
    reg.B_mu = VectorXd::Zero(nb);
    for (Index i = 0; i < nb; ++i) reg.B_mu(i) = -y(r + i);
    if (nb > 0 && reg.B_mu.minCoeff() < -1e-7)
        throw DegenerateRegion("basis duals negative at theta0");

    const double scale = domain_scale(plp);
    std::vector<Halfspace> hs;
    const Index mi = plp.A_ie.rows();
    std::vector<bool> in_basis(static_cast<std::size_t>(mi), false);
    for (int j : sol.basis) in_basis[static_cast<std::size_t>(j)] = true;
    for (Index j = 0; j < mi; ++j) {
        if (in_basis[static_cast<std::size_t>(j)]) continue;
        reg.inactive_set.push_back(static_cast<int>(j));
        Eigen::RowVector2d c = plp.A_ie.row(j) * reg.A_x - plp.E_ie.row(j);
        double d = plp.b_ie(j) - plp.A_ie.row(j).dot(reg.B_x);
        if (c.cwiseAbs().maxCoeff() <= 1e-11 * (1.0 + std::abs(d))) {
            if (d < -opt.contain_tol * (1.0 + std::abs(d)))
                throw DegenerateRegion("inactive row violated identically");
            continue;
        }
        hs.push_back({c(0), c(1), d});
    }
    hs.push_back({1.0, 0.0, plp.theta_hi.x()});
    hs.push_back({-1.0, 0.0, -plp.theta_lo.x()});
    hs.push_back({0.0, 1.0, plp.theta_hi.y()});
    hs.push_back({0.0, -1.0, -plp.theta_lo.y()});

    reg.halfspaces = tidy_halfspaces(std::move(hs), opt.lp, scale);

    ChebyshevResult cheb = chebyshev_center(reg.halfspaces, opt.lp);
    if (cheb.radius < 1e-9 * scale)
        throw DegenerateRegion("region has empty interior");
    reg.interior_point = cheb.center;
    reg.chebyshev_radius = cheb.radius;
    return reg;
}

} // namespace

CriticalRegion build_region(const ParametricLP& plp, const Vector2d& theta0,
                            const MplpOptions& opt) {
    plp.check_dimensions();
    std::mt19937 rng(opt.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector2d theta = theta0;
    const double eps = 1e-7 * domain_scale(plp);
    for (int attempt = 0;; ++attempt) {
        try {
            return build_region_once(plp, theta, opt);
        } catch (const DegenerateRegion&) {
            if (attempt >= opt.degenerate_retries) throw;
            Vector2d dir(gauss(rng), gauss(rng));
            theta = theta0 + eps * dir.normalized();
            theta = theta.cwiseMax(plp.theta_lo).cwiseMin(plp.theta_hi);
        }
    }
}

std::optional<int> locate(const std::vector<CriticalRegion>& regions, const Vector2d& theta,
                          double tol) {
    for (const CriticalRegion& r : regions)
        if (r.contains(theta, tol)) return r.index;
    return std::nullopt;
}

RegionBank::RegionBank(ParametricLP plp, MplpOptions opt)
    : plp_(std::move(plp)), opt_(std::move(opt)) {
    plp_.check_dimensions();
}

std::optional<int> RegionBank::locate_built(const Vector2d& theta) const {
    return locate(regions_, theta, opt_.contain_tol);
}

int RegionBank::adopt(CriticalRegion region) {
    std::vector<int> key = region.active_set;
    for (std::size_t i = 0; i < keys_.size(); ++i)
        if (keys_[i] == key) return static_cast<int>(i);
    if (auto idx = locate(regions_, region.interior_point, opt_.contain_tol))
        return *idx; // duplicate geometry under a degenerate basis
    if (static_cast<int>(regions_.size()) >= opt_.max_regions)
        throw ExplorationOverflow("critical-region cap (" +
                                  std::to_string(opt_.max_regions) + ") exceeded");
    region.index = static_cast<int>(regions_.size());
    regions_.push_back(std::move(region));
    keys_.push_back(std::move(key));
    return regions_.back().index;
}

int RegionBank::locate_or_build(const Vector2d& theta) {
    if (auto idx = locate_built(theta)) return *idx;
    MplpOptions opt = opt_;
    opt.seed = opt_.seed + static_cast<unsigned>(regions_.size());
    return adopt(build_region(plp_, theta, opt));
}

void RegionBank::explore_all(const Vector2d& seed) {
    std::deque<int> queue;
    std::vector<bool> processed;
    queue.push_back(locate_or_build(seed));

    while (!queue.empty()) {
        int idx = queue.front();
        queue.pop_front();
        if (static_cast<std::size_t>(idx) < processed.size() && processed[idx]) continue;
        if (processed.size() <= static_cast<std::size_t>(idx)) processed.resize(idx + 1, false);
        processed[idx] = true;

        const CriticalRegion region = regions_[idx]; // copy: regions_ may grow
        auto vs = region.vertices(opt_.contain_tol);
        if (vs.size() < 2) continue;
        double diam = 0.0;
        for (std::size_t i = 0; i < vs.size(); ++i)
            for (std::size_t j = i + 1; j < vs.size(); ++j)
                diam = std::max(diam, (vs[i] - vs[j]).norm());
        double step = std::max(opt_.facet_step * diam, 1e-10 * domain_scale(plp_));

        for (const Halfspace& h : region.halfspaces) {
            std::vector<Vector2d> on_facet;
            for (const auto& v : vs) {
                double resid = h.c_t * v.x() + h.c_D * v.y() - h.d;
                if (std::abs(resid) <= 1e-7) on_facet.push_back(v);
            }
            if (on_facet.size() < 2) continue;
            Vector2d mid = Vector2d::Zero();
            for (const auto& v : on_facet) mid += v;
            mid /= static_cast<double>(on_facet.size());
            Vector2d normal(h.c_t, h.c_D); // unit by construction
            Vector2d candidate = mid + step * normal;
            if (!plp_.in_domain(candidate, 0.0)) continue;
            if (locate_built(candidate)) continue;
            try {
                int nidx = adopt(build_region(plp_, candidate, opt_));
                if (static_cast<std::size_t>(nidx) >= processed.size() || !processed[nidx])
                    queue.push_back(nidx);
            } catch (const InfeasiblePoint&) {
                // stepped outside the feasible set: boundary facet
            } catch (const DegenerateRegion&) {
                // lower-dimensional sliver; skip it
            }
        }
    }
}

std::vector<CriticalRegion> explore_regions(const ParametricLP& plp, const Vector2d& seed,
                                            const MplpOptions& opt) {
    RegionBank bank(plp, opt);
    bank.explore_all(seed);
    return bank.regions();
}

std::string dump_regions_json(const ParametricLP& plp,
                              const std::vector<CriticalRegion>& regions) {
    nlohmann::json j;
    j["theta_domain"] = {{"t", {round9(plp.theta_lo.x()), round9(plp.theta_hi.x())}},
                         {"D", {round9(plp.theta_lo.y()), round9(plp.theta_hi.y())}}};
    j["regions"] = nlohmann::json::array();
    for (const CriticalRegion& r : regions) {
        nlohmann::json jr;
        jr["index"] = r.index;
        jr["active_set"] = r.active_set;
        jr["halfspaces"] = nlohmann::json::array();
        for (const Halfspace& h : r.halfspaces)
            jr["halfspaces"].push_back({round9(h.c_t), round9(h.c_D), round9(h.d)});
        auto mat_json = [](const MatrixXd& m) {
            nlohmann::json out = nlohmann::json::array();
            for (Index i = 0; i < m.rows(); ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (Index c = 0; c < m.cols(); ++c) row.push_back(round9(m(i, c)));
                out.push_back(row);
            }
            return out;
        };
        auto vec_json = [](const VectorXd& v) {
            nlohmann::json out = nlohmann::json::array();
            for (Index i = 0; i < v.size(); ++i) out.push_back(round9(v(i)));
            return out;
        };
        jr["A_x"] = mat_json(r.A_x);
        jr["B_x"] = vec_json(r.B_x);
        jr["A_lam"] = mat_json(r.A_lam);
        jr["B_lam"] = vec_json(r.B_lam);
        jr["A_mu"] = mat_json(r.A_mu);
        jr["B_mu"] = vec_json(r.B_mu);
        j["regions"].push_back(std::move(jr));
    }
    return j.dump(2) + "\n";
}

} // namespace cted
