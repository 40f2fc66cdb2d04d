#include "cted/poly.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace cted {

Polynomial::Polynomial(std::vector<double> coef) : coef_(std::move(coef)) {
    if (coef_.empty()) coef_.push_back(0.0);
    trim();
}

void Polynomial::trim() {
    while (coef_.size() > 1 && coef_.back() == 0.0) coef_.pop_back();
}

double Polynomial::eval(double t) const {
    double acc = 0.0;
    for (auto it = coef_.rbegin(); it != coef_.rend(); ++it) acc = acc * t + *it;
    return acc;
}

Polynomial Polynomial::derivative() const {
    if (coef_.size() == 1) return Polynomial({0.0});
    std::vector<double> d(coef_.size() - 1);
    for (std::size_t i = 1; i < coef_.size(); ++i) d[i - 1] = coef_[i] * static_cast<double>(i);
    return Polynomial(std::move(d));
}

Polynomial Polynomial::antiderivative() const {
    std::vector<double> a(coef_.size() + 1, 0.0);
    for (std::size_t i = 0; i < coef_.size(); ++i) a[i + 1] = coef_[i] / static_cast<double>(i + 1);
    return Polynomial(std::move(a));
}

double Polynomial::integrate(double a, double b) const {
    Polynomial F = antiderivative();
    return F.eval(b) - F.eval(a);
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    std::vector<double> r(std::max(coef_.size(), o.coef_.size()), 0.0);
    for (std::size_t i = 0; i < coef_.size(); ++i) r[i] += coef_[i];
    for (std::size_t i = 0; i < o.coef_.size(); ++i) r[i] += o.coef_[i];
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
    return *this + o.scaled(-1.0);
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    std::vector<double> r(coef_.size() + o.coef_.size() - 1, 0.0);
    for (std::size_t i = 0; i < coef_.size(); ++i)
        for (std::size_t j = 0; j < o.coef_.size(); ++j)
            r[i + j] += coef_[i] * o.coef_[j];
    return Polynomial(std::move(r));
}

Polynomial Polynomial::scaled(double s) const {
    std::vector<double> r(coef_);
    for (double& c : r) c *= s;
    return Polynomial(std::move(r));
}

bool Polynomial::is_zero(double tol) const {
    for (double c : coef_)
        if (std::abs(c) > tol) return false;
    return true;
}

PiecewisePolynomial::PiecewisePolynomial(double lo, double hi, Polynomial p)
    : breaks_{lo, hi}, pieces_{std::move(p)} {
    if (!(lo < hi)) throw std::invalid_argument("PiecewisePolynomial: lo must be < hi");
}

PiecewisePolynomial::PiecewisePolynomial(std::vector<double> breaks, std::vector<Polynomial> pieces)
    : breaks_(std::move(breaks)), pieces_(std::move(pieces)) {
    if (breaks_.size() != pieces_.size() + 1 || pieces_.empty())
        throw std::invalid_argument("PiecewisePolynomial: breaks/pieces size mismatch");
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i)
        if (!(breaks_[i] < breaks_[i + 1]))
            throw std::invalid_argument("PiecewisePolynomial: breakpoints must increase");
}

std::size_t PiecewisePolynomial::piece_index(double t) const {
    if (t <= breaks_.front()) return 0;
    if (t >= breaks_.back()) return pieces_.size() - 1;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    return static_cast<std::size_t>(it - breaks_.begin()) - 1;
}

double PiecewisePolynomial::eval(double t) const {
    return pieces_[piece_index(t)].eval(t);
}

PiecewisePolynomial PiecewisePolynomial::derivative() const {
    std::vector<Polynomial> d;
    d.reserve(pieces_.size());
    for (const auto& p : pieces_) d.push_back(p.derivative());
    return PiecewisePolynomial(breaks_, std::move(d));
}

double PiecewisePolynomial::integrate(double a, double b) const {
    if (a > b) return -integrate(b, a);
    double acc = 0.0;
    std::size_t i0 = piece_index(a), i1 = piece_index(b);
    for (std::size_t i = i0; i <= i1; ++i) {
        double lo = std::max(a, breaks_[i]);
        double hi = std::min(b, breaks_[i + 1]);
        if (hi > lo) acc += pieces_[i].integrate(lo, hi);
    }
    return acc;
}

PiecewisePolynomial PiecewisePolynomial::with_window_added(double a, double b,
                                                           const Polynomial& p) const {
    if (!(a < b) || a < lo() - 1e-12 || b > hi() + 1e-12)
        throw std::invalid_argument("with_window_added: window outside domain");
    std::vector<double> nb;
    for (double t : breaks_) nb.push_back(t);
    auto insert_break = [&nb](double t) {
        auto it = std::lower_bound(nb.begin(), nb.end(), t);
        if (it == nb.end() || std::abs(*it - t) > 1e-12) nb.insert(it, t);
    };
    insert_break(a);
    insert_break(b);

    std::vector<Polynomial> np;
    for (std::size_t i = 0; i + 1 < nb.size(); ++i) {
        double mid = 0.5 * (nb[i] + nb[i + 1]);
        Polynomial base = pieces_[piece_index(mid)];
        if (mid > a && mid < b) base = base + p;
        np.push_back(std::move(base));
    }
    return PiecewisePolynomial(std::move(nb), std::move(np));
}

PiecewisePolynomial PiecewisePolynomial::affine_compose(double c_t, double c_D, double c0) const {
    Polynomial lin({c0, c_t});
    std::vector<Polynomial> np;
    np.reserve(pieces_.size());
    for (const auto& p : pieces_) np.push_back(p.scaled(c_D) + lin);
    return PiecewisePolynomial(breaks_, std::move(np));
}

namespace {

double auto_zero_band(const PiecewisePolynomial& g, double a, double b) {
    // Scale-aware band: relative to the magnitude of g over the endpoints of
    // its pieces within [a, b].
    double scale = std::abs(g.eval(a)) + std::abs(g.eval(b));
    for (double t : g.breakpoints())
        if (t > a && t < b) scale = std::max(scale, std::abs(g.eval(t)));
    return 1e-11 * (1.0 + scale);
}

// Bisect the predicate "g(t) > band" over [lo, hi] with g(lo) <= band < g(hi)
// (or the mirrored falling case) down to width tol.
double bisect_crossing(const PiecewisePolynomial& g, double lo, double hi, double band,
                       bool rising, double tol) {
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        double v = g.eval(mid);
        bool above = rising ? (v > band) : (v < band);
        if (above) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

RootScanResult scan_sign_changes(const PiecewisePolynomial& g, double a, double b,
                                 const RootScanOptions& opt) {
    RootScanResult out;
    if (!(a < b)) return out;
    double band = opt.zero_band > 0 ? opt.zero_band : auto_zero_band(g, a, b);

    // Grid including piece joints so no interval straddles a polynomial change.
    std::vector<double> grid;
    grid.push_back(a);
    for (double t = a + opt.grid_step; t < b; t += opt.grid_step) grid.push_back(t);
    for (double t : g.breakpoints())
        if (t > a && t < b) grid.push_back(t);
    grid.push_back(b);
    std::sort(grid.begin(), grid.end());

    int prev_state = 0; // -1 below band, 0 in band, +1 above band
    double prev_t = grid[0];
    {
        double v = g.eval(prev_t);
        prev_state = (v > band) ? 1 : (v < -band ? -1 : 0);
    }
    int last_nonzero = prev_state;
    double last_nonzero_t = prev_t;
    bool touched_band = false;

    for (std::size_t i = 1; i < grid.size(); ++i) {
        double t = grid[i];
        double v = g.eval(t);
        int state = (v > band) ? 1 : (v < -band ? -1 : 0);
        if (state != 0 && last_nonzero != 0 && state != last_nonzero) {
            bool rising = state > 0;
            double r = bisect_crossing(g, last_nonzero_t, t, rising ? band : -band,
                                       rising, opt.bisect_tol);
            if (r > a && r <= b) out.roots.push_back(r);
        } else if (state == 0) {
            touched_band = true;
        } else if (touched_band && state == last_nonzero) {
            ++out.contacts_seen; // dipped into the band and came back
            touched_band = false;
        }
        if (state != 0) {
            last_nonzero = state;
            last_nonzero_t = t;
            touched_band = false;
        }
        prev_t = t;
    }
    std::sort(out.roots.begin(), out.roots.end());
    return out;
}

double first_rising_crossing(const PiecewisePolynomial& g, double a, double b,
                             const RootScanOptions& opt, int* contacts) {
    if (!(a < b)) return -1.0;
    double band = opt.zero_band > 0 ? opt.zero_band : auto_zero_band(g, a, b);

    std::vector<double> grid;
    grid.push_back(a);
    for (double t = a + opt.grid_step; t < b; t += opt.grid_step) grid.push_back(t);
    for (double t : g.breakpoints())
        if (t > a && t < b) grid.push_back(t);
    grid.push_back(b);
    std::sort(grid.begin(), grid.end());

    double prev_t = grid[0];
    double prev_v = g.eval(prev_t);
    bool was_inside = prev_v <= band;
    int touch = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        double t = grid[i];
        double v = g.eval(t);
        if (was_inside && v > band) {
            double r = bisect_crossing(g, prev_t, t, band, true, opt.bisect_tol);
            if (contacts) *contacts += touch;
            return r;
        }
        if (std::abs(v) <= band) ++touch;
        was_inside = v <= band;
        prev_t = t;
        prev_v = v;
    }
    if (contacts) *contacts += touch;
    return -1.0;
}

} // namespace cted
