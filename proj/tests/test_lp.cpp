#include "doctest.h"

#include <random>

#include "cted/errors.hpp"
#include "cted/lp.hpp"
#include "support.hpp"

using namespace cted;
using testsupport::brute_force_lp;
using testsupport::kkt_report;

namespace {

// min 25 g1 + 30 g2  s.t.  g1 + g2 = 100,  0 <= g1 <= 80,  0 <= g2 <= 80.
// Hand enumeration of the basic feasible solutions: (80, 20) and (20, 80);
// the first costs 2600, the second 2900. The balance multiplier is the cost
// of the marginal (interior) unit: 30.
LinearProgram two_gen_lp() {
    LinearProgram lp;
    lp.f.resize(2);
    lp.f << 25.0, 30.0;
    lp.A_eq.resize(1, 2);
    lp.A_eq << 1.0, 1.0;
    lp.b_eq.resize(1);
    lp.b_eq << 100.0;
    lp.A_ie.resize(4, 2);
    lp.A_ie << 1, 0, 0, 1, -1, 0, 0, -1;
    lp.b_ie.resize(4);
    lp.b_ie << 80.0, 80.0, 0.0, 0.0;
    return lp;
}

} // namespace

TEST_CASE("two-generator dispatch: primal, duals, strong duality") {
    LinearProgram lp = two_gen_lp();
    LpSolution sol = solve_lp(lp);

    CHECK(sol.x(0) == doctest::Approx(80.0).epsilon(1e-10));
    CHECK(sol.x(1) == doctest::Approx(20.0).epsilon(1e-10));
    CHECK(sol.objective == doctest::Approx(2600.0).epsilon(1e-10));
    CHECK(sol.lambda(0) == doctest::Approx(30.0).epsilon(1e-10));
    CHECK(sol.mu(0) == doctest::Approx(5.0).epsilon(1e-8)); // binding g1 <= 80
    CHECK(sol.mu(1) == doctest::Approx(0.0));
    CHECK(sol.mu(2) == doctest::Approx(0.0));
    CHECK(sol.mu(3) == doctest::Approx(0.0));
    REQUIRE(sol.active_set == std::vector<int>{0});

    auto rep = kkt_report(lp, sol);
    CHECK(rep.stationarity <= 1e-8);
    CHECK(rep.comp_slackness <= 1e-6);
    CHECK(rep.duality_gap <= 1e-6);

    auto brute = brute_force_lp(lp);
    REQUIRE(brute.feasible);
    CHECK(sol.objective == doctest::Approx(brute.objective).epsilon(1e-10));
}

TEST_CASE("equality pins the variable; lambda matches the cost") {
    LinearProgram lp;
    lp.f.resize(1);
    lp.f << 1.0;
    lp.A_eq.resize(1, 1);
    lp.A_eq << 1.0;
    lp.b_eq.resize(1);
    lp.b_eq << 5.0;
    lp.A_ie.resize(2, 1);
    lp.A_ie << 1.0, -1.0;
    lp.b_ie.resize(2);
    lp.b_ie << 10.0, 0.0;
    LpSolution sol = solve_lp(lp);
    CHECK(sol.x(0) == doctest::Approx(5.0));
    CHECK(sol.lambda(0) == doctest::Approx(1.0));
    CHECK(sol.mu.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("contradictory constraints produce a Farkas certificate") {
    LinearProgram lp;
    lp.f.resize(1);
    lp.f << 1.0;
    lp.A_eq.resize(1, 1);
    lp.A_eq << 1.0;
    lp.b_eq.resize(1);
    lp.b_eq << 5.0;
    lp.A_ie.resize(2, 1);
    lp.A_ie << 1.0, -1.0;
    lp.b_ie.resize(2);
    lp.b_ie << 4.0, 0.0;
    try {
        solve_lp(lp);
        FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
        REQUIRE(e.eq_ray.size() == 1);
        REQUIRE(e.ie_ray.size() == 2);
        CHECK(e.ie_ray.minCoeff() >= -1e-12);
        Eigen::VectorXd combo = lp.A_eq.transpose() * e.eq_ray + lp.A_ie.transpose() * e.ie_ray;
        CHECK(combo.cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(lp.b_eq.dot(e.eq_ray) + lp.b_ie.dot(e.ie_ray) < -1e-9);
    }
}

TEST_CASE("unbounded problems produce a primal ray") {
    LinearProgram lp;
    lp.f.resize(1);
    lp.f << -1.0;
    lp.A_eq.resize(0, 1);
    lp.b_eq.resize(0);
    lp.A_ie.resize(1, 1);
    lp.A_ie << -1.0;
    lp.b_ie.resize(1);
    lp.b_ie << 0.0;
    try {
        solve_lp(lp);
        FAIL("expected UnboundedError");
    } catch (const UnboundedError& e) {
        REQUIRE(e.ray.size() == 1);
        CHECK(lp.f.dot(e.ray) < 0);
        CHECK((lp.A_ie * e.ray).maxCoeff() <= 1e-12);
    }
}

TEST_CASE("random instances match brute-force enumeration and satisfy KKT") {
    std::mt19937 rng(2024);
    for (int rep = 0; rep < 60; ++rep) {
        int n = 2 + static_cast<int>(rng() % 2);
        int me = static_cast<int>(rng() % 2);
        if (me >= n) me = 0;
        LinearProgram lp = testsupport::random_lp(rng, n, me, 4);
        LpSolution sol = solve_lp(lp);
        auto brute = brute_force_lp(lp);
        REQUIRE(brute.feasible);
        CHECK(sol.objective == doctest::Approx(brute.objective).epsilon(1e-8));

        auto rep_k = kkt_report(lp, sol);
        CHECK(rep_k.eq_residual <= 1e-7);
        CHECK(rep_k.ie_violation <= 1e-7);
        CHECK(rep_k.min_mu >= -1e-8);
        CHECK(rep_k.comp_slackness <= 1e-6);
        CHECK(rep_k.stationarity <= 1e-7);
        CHECK(rep_k.duality_gap <= 1e-6);
    }
}

TEST_CASE("equality multiplier predicts the optimum's sensitivity") {
    std::mt19937 rng(77);
    int checked = 0;
    for (int rep = 0; rep < 40 && checked < 10; ++rep) {
        LinearProgram lp = testsupport::random_lp(rng, 3, 1, 3);
        LpSolution sol = solve_lp(lp);
        // Skip degenerate instances: more tight rows than the basis needs.
        if (static_cast<int>(sol.active_set.size()) != static_cast<int>(sol.basis.size()))
            continue;
        const double delta = 1e-4;
        LinearProgram bumped = lp;
        bumped.b_eq(0) += delta;
        LpSolution sol2 = solve_lp(bumped);
        double predicted = sol.lambda(0) * delta;
        CHECK(sol2.objective - sol.objective == doctest::Approx(predicted).epsilon(1e-6));
        ++checked;
    }
    CHECK(checked >= 5);
}

TEST_CASE("active set reconstructs the solution") {
    std::mt19937 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        LinearProgram lp = testsupport::random_lp(rng, 3, 1, 4);
        LpSolution sol = solve_lp(lp);
        Eigen::Index rows = lp.A_eq.rows() + static_cast<Eigen::Index>(sol.basis.size());
        REQUIRE(rows == 3);
        Eigen::MatrixXd M(rows, 3);
        Eigen::VectorXd b(rows);
        M.topRows(lp.A_eq.rows()) = lp.A_eq;
        b.head(lp.A_eq.rows()) = lp.b_eq;
        for (std::size_t i = 0; i < sol.basis.size(); ++i) {
            M.row(lp.A_eq.rows() + static_cast<Eigen::Index>(i)) = lp.A_ie.row(sol.basis[i]);
            b(lp.A_eq.rows() + static_cast<Eigen::Index>(i)) = lp.b_ie(sol.basis[i]);
        }
        Eigen::VectorXd x = M.fullPivLu().solve(b);
        CHECK((x - sol.x).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("degenerate duals are deterministic") {
    // Redundant description of the same vertex: x = (1,1) pinned four ways.
    LinearProgram lp;
    lp.f.resize(2);
    lp.f << 1.0, 1.0;
    lp.A_eq.resize(0, 2);
    lp.b_eq.resize(0);
    lp.A_ie.resize(5, 2);
    lp.A_ie << -1, 0, 0, -1, -1, -1, -1, -2, -2, -1;
    lp.b_ie.resize(5);
    lp.b_ie << -1, -1, -2, -3, -3;
    LpSolution a = solve_lp(lp);
    LpSolution b = solve_lp(lp);
    CHECK(a.x == b.x);
    CHECK(a.lambda == b.lambda);
    CHECK(a.mu == b.mu);
    CHECK(a.basis == b.basis);
    CHECK(a.objective == doctest::Approx(2.0));
    CHECK(a.active_set.size() >= 3); // all five rows tight at (1,1) except none... at least the binding ones
}

TEST_CASE("warm-start hints do not change the answer") {
    LinearProgram lp = two_gen_lp();
    LpSolution cold = solve_lp(lp);
    LpSolution warm = solve_lp(lp, {}, cold.basis);
    CHECK(cold.x == warm.x);
    CHECK(cold.objective == doctest::Approx(warm.objective));
    CHECK(warm.pivots <= cold.pivots);
}

TEST_CASE("redundant equality rows are dropped and reported") {
    LinearProgram lp;
    lp.f.resize(2);
    lp.f << 1.0, 2.0;
    lp.A_eq.resize(2, 2);
    lp.A_eq << 1.0, 1.0, 2.0, 2.0; // duplicate direction
    lp.b_eq.resize(2);
    lp.b_eq << 3.0, 6.0;
    lp.A_ie.resize(4, 2);
    lp.A_ie << 1, 0, 0, 1, -1, 0, 0, -1;
    lp.b_ie.resize(4);
    lp.b_ie << 10, 10, 0, 0;
    LpSolution sol = solve_lp(lp);
    CHECK(sol.dropped_equalities == std::vector<int>{1});
    CHECK(sol.x.sum() == doctest::Approx(3.0));
    CHECK(sol.objective == doctest::Approx(3.0)); // all weight on the cheap variable
    CHECK(sol.lambda(1) == 0.0);

    LinearProgram bad = lp;
    bad.b_eq(1) = 7.0; // now inconsistent
    CHECK_THROWS_AS(solve_lp(bad), InfeasibleError);
}
