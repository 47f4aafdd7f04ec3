#include <doctest.h>

#include <cmath>
#include <random>

#include "evmopf/conic_program.hpp"
#include "evmopf/conic_solver.hpp"

using namespace evmopf;

TEST_CASE("single bound: min x s.t. x >= 3") {
    ConicProgram p;
    p.add_variable("x", 3.0, kInf, 1.0);
    const auto sol = solve_conic(p);
    REQUIRE(sol.ok());
    CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(sol.dual_objective <= sol.objective + 1e-8);
}

TEST_CASE("rotated cone: min x s.t. 2 x * 1 >= 1") {
    ConicProgram p;
    const auto x = p.add_variable("x", -kInf, kInf, 1.0);
    p.add_cone({ConeKind::rotated, {AffineExpr::variable(x), AffineExpr(1.0), AffineExpr(1.0)}, "c"});
    const auto sol = solve_conic(p);
    REQUIRE(sol.ok());
    CHECK(sol.x[x] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("second-order cone: min t s.t. ||(x - 3, y + 4)|| <= t") {
    ConicProgram p;
    const auto t = p.add_variable("t", -kInf, kInf, 1.0);
    const auto x = p.add_variable("x", -kInf, kInf);
    const auto y = p.add_variable("y", -kInf, kInf);
    LinearRow row;
    row.terms = {{x, 1.0}, {y, 1.0}};
    row.lower = row.upper = 0.0;
    p.add_row(row);
    AffineExpr ex = AffineExpr::variable(x);
    ex.constant = -3.0;
    AffineExpr ey = AffineExpr::variable(y);
    ey.constant = 4.0;
    p.add_cone({ConeKind::second_order, {AffineExpr::variable(t), ex, ey}, "c"});
    const auto sol = solve_conic(p);
    REQUIRE(sol.ok());
    // Distance from (3, -4) to the line x + y = 0 is |3 - 4| / sqrt(2).
    CHECK(sol.objective == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-7));
    CHECK(sol.x[x] + sol.x[y] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("linear program with ranged rows matches the vertex solution") {
    // max x + 2y  s.t. x + y <= 4, x <= 3, 0 <= x, 0 <= y <= 3  -> (1, 3), value 7
    ConicProgram p;
    const auto x = p.add_variable("x", 0.0, kInf, -1.0);
    const auto y = p.add_variable("y", 0.0, 3.0, -2.0);
    p.add_row({{{x, 1.0}, {y, 1.0}}, -kInf, 4.0, "sum"});
    p.add_row({{{x, 1.0}}, -1.0, 3.0, "range"});
    const auto sol = solve_conic(p);
    REQUIRE(sol.ok());
    CHECK(sol.objective == doctest::Approx(-7.0).epsilon(1e-8));
    CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.x[y] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("primal infeasibility is reported") {
    ConicProgram p;
    const auto x = p.add_variable("x", 0.0, 1.0, 1.0);
    p.add_row({{{x, 1.0}}, 2.0, kInf, "too big"});
    const auto sol = solve_conic(p);
    CHECK(sol.status == ConicStatus::infeasible);
}

TEST_CASE("unboundedness is reported") {
    ConicProgram p;
    p.add_variable("x", -kInf, 5.0, 1.0);
    const auto sol = solve_conic(p);
    CHECK(sol.status == ConicStatus::unbounded);
}

TEST_CASE("offset and constant cone entries are honoured") {
    // min x^2 + 1 via epigraph z >= x^2, with x >= 2  -> 5
    ConicProgram p;
    const auto x = p.add_variable("x", 2.0, kInf);
    const auto z = p.add_variable("z", 0.0, kInf, 1.0);
    p.offset = 1.0;
    p.add_cone({ConeKind::rotated, {AffineExpr::variable(z), AffineExpr(0.5), AffineExpr::variable(x)}, "epi"});
    const auto sol = solve_conic(p);
    REQUIRE(sol.ok());
    CHECK(sol.objective == doctest::Approx(5.0).epsilon(1e-7));
    CHECK(sol.dual_objective == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("random feasible programs: weak duality and certified bounds") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        // min c'x s.t. ||x - x0|| <= 1, l <= x <= u with x0 inside the box.
        const std::size_t n = 4;
        ConicProgram p;
        std::vector<double> x0(n);
        for (std::size_t j = 0; j < n; ++j) {
            x0[j] = u(rng);
            p.add_variable("x" + std::to_string(j), x0[j] - 0.7, x0[j] + 0.5, u(rng) * 100.0);
        }
        ConeBlock ball;
        ball.entries.push_back(AffineExpr(1.0));
        for (std::size_t j = 0; j < n; ++j) {
            AffineExpr e = AffineExpr::variable(j);
            e.constant = -x0[j];
            ball.entries.push_back(e);
        }
        p.add_cone(ball);
        const auto sol = solve_conic(p);
        REQUIRE(sol.ok());
        CHECK(sol.dual_objective <= sol.objective + 1e-8 * (1.0 + std::abs(sol.objective)));
        CHECK(p.max_violation(sol.x) <= 1e-7);
        CHECK(std::abs(sol.objective - sol.dual_objective) <=
              1e-7 * (1.0 + std::abs(sol.objective)));
    }
}

TEST_CASE("sparse text export round-trips") {
    ConicProgram p;
    const auto x = p.add_variable("x", 0.0, kInf, 2.0);
    const auto y = p.add_variable("y", -kInf, 4.5, -1.0);
    p.offset = 3.25;
    p.add_row({{{x, 1.0}, {y, -2.0}}, -1.0, 7.0, "r0"});
    p.add_cone({ConeKind::rotated, {AffineExpr::variable(x, 0.5), AffineExpr(2.0), AffineExpr::variable(y)}, "k0"});
    const auto text = export_conic_program(p);
    const auto q = import_conic_program(text);
    CHECK(export_conic_program(q) == text);
    CHECK(q.num_variables() == 2);
    CHECK(q.cones[0].kind == ConeKind::rotated);
    CHECK(q.cones[0].entries[1].constant == 2.0);
    CHECK(q.ub[y] == 4.5);
    CHECK(std::isinf(q.lb[y]));
}

TEST_CASE("malformed text is rejected with a line number") {
    CHECK_THROWS_WITH_AS(import_conic_program("CONIC_PROGRAM 1 0 0\nv 3 x 0 1 0\n"),
                         doctest::Contains("line 2"), std::invalid_argument);
}

TEST_CASE("certified bound stays below the optimum for perturbed multipliers") {
    // min x + 2y + t  s.t.  x + y >= 1,  ||(x - 1, y)|| <= t,  0 <= x, y <= 4
    ConicProgram p;
    const auto x = p.add_variable("x", 0.0, 4.0, 1.0);
    const auto y = p.add_variable("y", 0.0, 4.0, 2.0);
    const auto t = p.add_variable("t", -kInf, kInf, 1.0);
    p.add_row({{{x, 1.0}, {y, 1.0}}, 1.0, kInf, "sum"});
    AffineExpr ex = AffineExpr::variable(x);
    ex.constant = -1.0;
    p.add_cone({ConeKind::second_order, {AffineExpr::variable(t), ex, AffineExpr::variable(y)}, "c"});
    const auto sol = solve_conic(p);
    REQUIRE(sol.ok());
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.certified_bound <= 1.0);

    // t has no box, so a residual on it cannot be certified ...
    const auto form = to_standard_form(p);
    std::mt19937 rng(9);
    std::normal_distribution<double> noise(0.0, 1e-3);
    Eigen::VectorXd z = sol.z;
    z[0] += 0.1;
    CHECK(certified_lower_bound(p, form, sol.y, z) <= 1.0);
    // ... until the program supplies one containing the optimum.
    p.implied_lb = {0.0, 0.0, 0.0};
    p.implied_ub = {4.0, 4.0, 10.0};
    CHECK(certified_lower_bound(p, form, sol.y, sol.z) == doctest::Approx(1.0).epsilon(1e-6));
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd yp = sol.y;
        Eigen::VectorXd zp = sol.z;
        for (Eigen::Index i = 0; i < yp.size(); ++i) {
            yp[i] += noise(rng);
        }
        for (Eigen::Index i = 0; i < zp.size(); ++i) {
            zp[i] += noise(rng);
        }
        const double b = certified_lower_bound(p, form, yp, zp);
        CHECK(std::isfinite(b));
        CHECK(b <= 1.0 + 1e-12);
    }
}
