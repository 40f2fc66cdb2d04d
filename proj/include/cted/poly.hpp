#pragma once

#include <vector>

namespace cted {

/// Dense univariate polynomial, coefficients in ascending powers of t.
class Polynomial {
public:
    Polynomial() : coef_{0.0} {}
    explicit Polynomial(std::vector<double> coef);
    static Polynomial constant(double c) { return Polynomial({c}); }

    int degree() const { return static_cast<int>(coef_.size()) - 1; }
    const std::vector<double>& coefficients() const { return coef_; }

    double eval(double t) const;           // Horner
    Polynomial derivative() const;
    Polynomial antiderivative() const;     // constant term 0
    double integrate(double a, double b) const;

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial scaled(double s) const;
    Polynomial shifted(double c) const { return *this + constant(c); }

    bool is_zero(double tol = 0.0) const;

private:
    std::vector<double> coef_;
    void trim();
};

/// Piecewise polynomial over contiguous intervals
/// [b_0, b_1], [b_1, b_2], ..., [b_{m-1}, b_m].
/// The single-piece case is the common one; extra pieces appear only when a
/// windowed perturbation is overlaid on a load profile.
class PiecewisePolynomial {
public:
    PiecewisePolynomial(double lo, double hi, Polynomial p);
    PiecewisePolynomial(std::vector<double> breaks, std::vector<Polynomial> pieces);

    double lo() const { return breaks_.front(); }
    double hi() const { return breaks_.back(); }
    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<Polynomial>& pieces() const { return pieces_; }
    std::size_t piece_count() const { return pieces_.size(); }

    /// Piece index owning t: piece i covers [b_i, b_{i+1}); the last piece
    /// also owns b_m. t outside [lo, hi] is clamped to the nearest piece.
    std::size_t piece_index(double t) const;

    double eval(double t) const;
    PiecewisePolynomial derivative() const;
    double integrate(double a, double b) const;

    /// Sum with `p` restricted to the window [a, b]; splits pieces at a and b.
    PiecewisePolynomial with_window_added(double a, double b, const Polynomial& p) const;

    /// Affine image c_t * t + c_D * self(t) + c0 as a piecewise polynomial.
    PiecewisePolynomial affine_compose(double c_t, double c_D, double c0) const;

private:
    std::vector<double> breaks_;
    std::vector<Polynomial> pieces_;
};

struct RootScanOptions {
    double grid_step = 0.01;    // minutes between sign probes
    double bisect_tol = 1e-9;   // bracket width at which bisection stops
    double zero_band = 0.0;     // |g| below this counts as zero (0 = auto)
};

/// All points in (a, b] where g changes sign, found by uniform-grid
/// bracketing plus bisection. Tangential contact (g touches the zero band
/// without crossing) is not reported as a root; contacts_seen counts the
/// brackets where that happened.
struct RootScanResult {
    std::vector<double> roots;
    int contacts_seen = 0;
};

RootScanResult scan_sign_changes(const PiecewisePolynomial& g, double a, double b,
                                 const RootScanOptions& opt = {});

/// Smallest t in (a, b] where g first exceeds +zero_band having started at
/// or below it (a "rising crossing"). Returns a negative value when there is
/// none. Used for critical-region exit detection.
double first_rising_crossing(const PiecewisePolynomial& g, double a, double b,
                             const RootScanOptions& opt, int* contacts = nullptr);

} // namespace cted
