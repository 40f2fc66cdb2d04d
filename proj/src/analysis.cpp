#include "cted/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cted/errors.hpp"
#include "cted/numfmt.hpp"

namespace cted {

namespace {

// Breakpoint union of the trajectory segments, the discrete LMP steps, and
// the load pieces; each cell carries a single polynomial for lambda_ct - L.
struct DiffPieces {
    std::vector<double> breaks;
    std::vector<Polynomial> polys;
};

DiffPieces difference_pieces(const PiecewiseTrajectory& ct, const LmpStepFunction& dt) {
    const double lo = ct.start(), hi = ct.end();
    const double tol = 1e-9 * (1.0 + std::abs(hi));
    if (std::abs(dt.breakpoints.front() - lo) > tol || std::abs(dt.breakpoints.back() - hi) > tol)
        throw ValidationError("price_difference: horizons differ");

    std::vector<double> cuts{lo, hi};
    for (double e : ct.endpoints()) cuts.push_back(e);
    for (double e : dt.breakpoints) cuts.push_back(e);
    for (double e : ct.load().piecewise().breakpoints()) cuts.push_back(e);
    std::sort(cuts.begin(), cuts.end());
    DiffPieces out;
    for (double c : cuts) {
        c = std::min(std::max(c, lo), hi);
        if (out.breaks.empty() || c - out.breaks.back() > tol) out.breaks.push_back(c);
    }

    const auto& load = ct.load().piecewise();
    for (std::size_t i = 0; i + 1 < out.breaks.size(); ++i) {
        double mid = 0.5 * (out.breaks[i] + out.breaks[i + 1]);
        const auto& seg = ct.segments()[ct.segment_index_right(mid)];
        const Polynomial& dpoly = load.pieces()[load.piece_index(mid)];
        // lambda(t) = p_t t + p_D D(t) + p_b; subtract the constant step value.
        Polynomial lam = dpoly.scaled(seg.p_D) + Polynomial({seg.p_b - dt.value_at(mid), seg.p_t});
        out.polys.push_back(std::move(lam));
    }
    return out;
}

} // namespace

PriceDifferenceResult price_difference(const PiecewiseTrajectory& ct, const LmpStepFunction& dt,
                                       double price_tol) {
    DiffPieces pieces = difference_pieces(ct, dt);
    PriceDifferenceResult out{
        {}, PiecewisePolynomial(pieces.breaks, pieces.polys)};

    // Sub-spans with |difference| > tol inside each cell, then merge across
    // touching cells.
    struct RawSpan {
        double lo, hi;
    };
    std::vector<RawSpan> raw;
    for (std::size_t i = 0; i + 1 < pieces.breaks.size(); ++i) {
        double a = pieces.breaks[i], b = pieces.breaks[i + 1];
        PiecewisePolynomial cell(a, b, pieces.polys[i]);
        std::vector<double> cuts{a, b};
        RootScanOptions ropt;
        ropt.grid_step = std::max(1e-4, (b - a) / 1024.0);
        for (double sign : {1.0, -1.0}) {
            PiecewisePolynomial shifted = cell.affine_compose(0.0, sign, -price_tol);
            for (double r : scan_sign_changes(shifted, a, b, ropt).roots) cuts.push_back(r);
        }
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            double mid = 0.5 * (cuts[c] + cuts[c + 1]);
            if (std::abs(pieces.polys[i].eval(mid)) > price_tol)
                raw.push_back({cuts[c], cuts[c + 1]});
        }
    }
    std::sort(raw.begin(), raw.end(), [](const RawSpan& x, const RawSpan& y) {
        return x.lo < y.lo;
    });
    const double join_tol = 1e-9 * (1.0 + std::abs(ct.end()));
    std::vector<RawSpan> merged;
    for (const RawSpan& s : raw) {
        if (!merged.empty() && s.lo - merged.back().hi <= join_tol)
            merged.back().hi = std::max(merged.back().hi, s.hi);
        else
            merged.push_back(s);
    }
    for (const RawSpan& s : merged) {
        if (s.hi - s.lo <= join_tol) continue;
        std::vector<double> bks;
        std::vector<Polynomial> ps;
        for (std::size_t i = 0; i + 1 < pieces.breaks.size(); ++i) {
            double a = std::max(pieces.breaks[i], s.lo);
            double b = std::min(pieces.breaks[i + 1], s.hi);
            if (b - a <= join_tol) continue;
            if (bks.empty()) bks.push_back(a);
            bks.push_back(b);
            ps.push_back(pieces.polys[i]);
        }
        out.spans.push_back({s.lo, s.hi, PiecewisePolynomial(bks, ps)});
    }
    return out;
}

std::vector<RevenueEntry> revenue_discrepancy(const PriceDifferenceResult& diff,
                                              const PiecewiseTrajectory& gen) {
    std::vector<RevenueEntry> out;
    const auto& load = gen.load().piecewise();
    for (const PriceDiffSpan& span : diff.spans) {
        RevenueEntry entry;
        entry.t_lo = span.t_lo;
        entry.t_hi = span.t_hi;
        entry.per_unit.assign(gen.unit_count(), 0.0);

        std::vector<double> cuts;
        cuts.push_back(span.t_lo);
        cuts.push_back(span.t_hi);
        for (double e : span.difference.breakpoints()) cuts.push_back(e);
        for (double e : gen.endpoints()) cuts.push_back(e);
        for (double e : load.breakpoints()) cuts.push_back(e);
        std::sort(cuts.begin(), cuts.end());
        const double tol = 1e-12 * (1.0 + std::abs(span.t_hi));

        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            double a = std::max(cuts[c], span.t_lo);
            double b = std::min(cuts[c + 1], span.t_hi);
            if (b - a <= tol) continue;
            double mid = 0.5 * (a + b);
            const Polynomial& dposc = span.difference.pieces()[span.difference.piece_index(mid)];
            const Polynomial& dpoly = load.pieces()[load.piece_index(mid)];
            const auto& seg = gen.segments()[gen.segment_index_right(mid)];
            for (std::size_t k = 0; k < gen.unit_count(); ++k) {
                Eigen::Index ki = static_cast<Eigen::Index>(k);
                Polynomial xk = dpoly.scaled(seg.a_D(ki)) +
                                Polynomial({seg.b(ki), seg.a_t(ki)});
                entry.per_unit[k] += (dposc * xk).integrate(a, b) / 60.0;
            }
        }
        for (double v : entry.per_unit) entry.total += v;
        out.push_back(std::move(entry));
    }
    return out;
}

SubgradientCheckResult subgradient_check(const System& sys, const FinalSolution& base,
                                         double tau, double bump, double width,
                                         const SolveConfig& config) {
    if (!(width > 0)) throw ValidationError("subgradient check: width must be > 0");
    const double a = tau, b = tau + width;
    const auto& segs = base.trajectory.segments();
    std::size_t si = base.trajectory.segment_index_right(tau);
    const double tol = 1e-9 * (1.0 + std::abs(b));
    if (a < segs[si].t_start - tol || b > segs[si].t_end + tol)
        throw WindowCrossesEndpoint("window [" + format_number(a) + ", " + format_number(b) +
                                    "] is not strictly inside one trajectory segment");

    SubgradientCheckResult out;
    out.lambda_at_tau = base.trajectory.price_right(tau);
    out.predicted = out.lambda_at_tau * bump * width / 60.0;

    // Parabolic bump, zero at the window edges, mean height = bump so that
    // the integral of deltaD equals bump * width.
    double c = 6.0 * bump / (width * width);
    Polynomial qp({-c * a * b, c * (a + b), -c});

    SolveConfig cfg = config;
    cfg.forced_endpoints.push_back(a);
    cfg.forced_endpoints.push_back(b);

    FinalSolution base_forced = run(sys, cfg);
    System perturbed(sys.units, sys.load.with_bump(a, b, qp));
    FinalSolution pert = run(perturbed, cfg);

    out.base_cost = base_forced.total_cost;
    out.perturbed_cost = pert.total_cost;
    out.actual = pert.total_cost - base_forced.total_cost;
    double denom = std::max(std::abs(out.predicted), 1e-300);
    out.relative_error = std::abs(out.actual - out.predicted) / denom;
    return out;
}

std::string comparison_csv(const PiecewiseTrajectory& ct, const LmpStepFunction& dt,
                           double sample_step) {
    if (!(sample_step > 0)) throw ValidationError("comparison csv: sample step must be > 0");
    std::ostringstream os;
    os << "t,lambda_ct,lambda_dt,diff\n";
    const double lo = ct.start(), hi = ct.end();
    long n = static_cast<long>(std::floor((hi - lo) / sample_step + 0.5));
    for (long i = 0; i <= n; ++i) {
        double t = std::min(lo + sample_step * static_cast<double>(i), hi);
        double lc = ct.price_at(t);
        double ld = dt.value_at(t);
        os << format_number(t) << ',' << format_number(lc) << ',' << format_number(ld) << ','
           << format_number(lc - ld) << '\n';
    }
    return os.str();
}

} // namespace cted
