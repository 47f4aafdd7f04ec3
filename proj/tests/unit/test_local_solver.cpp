#include <doctest.h>

#include <cmath>
#include <limits>

#include "evmopf/local_solver.hpp"
#include "evmopf/pareto.hpp"
#include "test_support.hpp"
#include "two_bus_oracle.hpp"

using namespace evmopf;

namespace {

ScheduleEvaluation solve_without_ev(const MopfInstance& inst, const SocpPoint* warm = nullptr) {
    const auto T = static_cast<Eigen::Index>(inst.horizon());
    return evaluate_schedule(inst, Eigen::MatrixXd::Zero(0, T), Eigen::MatrixXd::Zero(0, T), warm,
                             LocalOptions{}, 1);
}

MopfInstance with_ev_bus(double driving_kwh, std::size_t drive_period) {
    auto inst = test::fixture_instance("case2_radial.m", {false, true, false});
    const std::size_t T = inst.horizon();
    const double base = inst.network.base_mva;
    EvBus e;
    e.bus = 1;
    e.energy.assign(T, 0.0);
    e.energy[drive_period] = kwh_to_pu(driving_kwh, base);
    e.charge_max.assign(T, kwh_to_pu(6.6, base));
    e.charge_max[drive_period] = 0.0;
    e.discharge_max = e.charge_max;
    e.stock_min.assign(T, 0.0);
    e.stock_min[drive_period] = e.energy[drive_period];
    e.stock_max.assign(T, kwh_to_pu(32.0, base));
    inst.ev.push_back(e);
    inst.ev_enabled = true;
    return inst;
}

}  // namespace

TEST_CASE("single bus: generation covers load plus shunt at minimum voltage") {
    const Network net = parse_case_file(test::fixture("case1_shunt.m"));
    const auto inst = test::single_period(net);
    const auto eval = solve_without_ev(inst);
    REQUIRE(eval.valid);
    const double p = 50.0 + 10.0 * 0.95 * 0.95;  // MW
    CHECK(100.0 * eval.periods[0].pg[0] == doctest::Approx(p).epsilon(1e-7));
    CHECK(eval.periods[0].vm[0] == doctest::Approx(0.95).epsilon(1e-7));
    CHECK(eval.cost == doctest::Approx(0.01 * p * p + 20.0 * p).epsilon(1e-7));
    const auto rel = solve_relaxation(inst, ConicOptions{});
    REQUIRE(rel.ok());
    CHECK(rel.solution.objective == doctest::Approx(eval.cost).epsilon(1e-7));
}

TEST_CASE("two buses: local optimum matches the brute-force oracle") {
    const Network net = parse_case_file(test::fixture("case2_radial.m"));
    const auto inst = test::single_period(net);
    const double oracle = test::two_bus_oracle_cost();
    REQUIRE(std::isfinite(oracle));
    const auto eval = solve_without_ev(inst);
    REQUIRE(eval.valid);
    CHECK(std::abs(eval.cost - oracle) <= 1e-4 * oracle);
    const auto rel = solve_relaxation(inst, ConicOptions{});
    REQUIRE(rel.ok());
    CHECK(rel.solution.dual_objective <= oracle + 1e-4 * oracle);
    CHECK(rel.solution.objective <= eval.cost + 1e-6 * eval.cost);
}

TEST_CASE("midnight charging fills the requirement greedily") {
    const auto inst = with_ev_bus(10.0, 18);
    const auto sch = benchmark_charging(inst);
    CHECK(sch.feasible);
    const double base = inst.network.base_mva;
    CHECK(pu_to_kwh(sch.charge(0, 0), base) == doctest::Approx(6.6).epsilon(1e-12));
    CHECK(pu_to_kwh(sch.charge(0, 1), base) == doctest::Approx((10.0 - 0.9 * 6.6) / 0.9).epsilon(1e-12));
    CHECK(pu_to_kwh(sch.charge(0, 1), base) == doctest::Approx(4.511).epsilon(1e-4));
    for (Eigen::Index t = 2; t < sch.charge.cols(); ++t) {
        CHECK(sch.charge(0, t) == 0.0);
    }
    CHECK(sch.discharge.cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(sch.stock(0, sch.stock.cols() - 1) - inst.ev[0].initial) <= 1e-15);
}

TEST_CASE("midnight charging edge cases") {
    const auto idle = benchmark_charging(with_ev_bus(0.0, 18));
    CHECK(idle.feasible);
    CHECK(idle.charge.cwiseAbs().maxCoeff() == 0.0);

    const auto early = benchmark_charging(with_ev_bus(5.0, 0));
    CHECK_FALSE(early.feasible);
    REQUIRE_FALSE(early.issues.empty());
    CHECK(early.issues.front().code == "stock bound");

    const auto too_much = benchmark_charging(with_ev_bus(500.0, 23));
    CHECK_FALSE(too_much.feasible);
    CHECK(too_much.issues.front().code == "insufficient charging");
}

TEST_CASE("energy balance repair") {
    auto inst = with_ev_bus(10.0, 18);
    const auto T = static_cast<Eigen::Index>(inst.horizon());
    const double unit = kwh_to_pu(1.0, inst.network.base_mva);
    const auto imbalance = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return stock_trajectory(inst, a, b)(0, T) - inst.ev[0].initial;
    };
    // Short by 1e-6 kWh of stored energy, with some discharging to trim first.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, T);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(1, T);
    a(0, 2) = 6.6 * unit;
    a(0, 3) = 6.6 * unit;
    b(0, 5) = (2 * 0.9 * 6.6 - 10.0 + 1e-6) * unit;
    CHECK(imbalance(a, b) < 0.0);
    CHECK(conserve_energy(inst, a, b) == 0.0);
    CHECK(std::abs(imbalance(a, b)) <= 1e-18);
    CHECK(b(0, 5) == doctest::Approx((2 * 0.9 * 6.6 - 10.0) * unit).epsilon(1e-9));
    // Surplus: charging is trimmed in the period with the most of it.
    a(0, 7) = 1.0 * unit;
    CHECK(conserve_energy(inst, a, b) == 0.0);
    CHECK(std::abs(imbalance(a, b)) <= 1e-18);
    CHECK(a(0, 7) == doctest::Approx(unit));
    CHECK(a(0, 2) + a(0, 3) == doctest::Approx(12.2 * unit));
    // Rate limits that cannot cover the driving leave the shortfall.
    Eigen::MatrixXd none = Eigen::MatrixXd::Zero(1, T);
    Eigen::MatrixXd nob = none;
    inst.ev[0].charge_max.assign(inst.horizon(), 0.1 * unit);
    inst.ev[0].charge_max[18] = 0.0;
    const double left = conserve_energy(inst, none, nob);
    CHECK(left == doctest::Approx((10.0 - 0.9 * 0.1 * 23) * unit));
}

TEST_CASE("warm starts from the relaxation and from the flat start") {
    const Network net = parse_case_file(test::fixture("case5_meshed.m"));
    const auto inst = test::single_period(net);
    const auto rel = solve_relaxation(inst, ConicOptions{});
    REQUIRE(rel.ok());
    const auto problem = build_acopf_period(inst, 0, {}, {});
    const auto ws = warm_start_from_socp(problem, rel.point, 0);
    CHECK(ws.x[problem.va(inst.network.reference_bus())] == 0.0);
    const auto warm = solve_local(problem, ws.x);
    const auto flat = solve_local(problem, problem.flat_start());
    REQUIRE(warm.ok());
    REQUIRE(flat.ok());
    CHECK(warm.objective == doctest::Approx(flat.objective).epsilon(1e-7));
    CHECK(warm.residuals.max() <= 1e-6);
    CHECK(rel.solution.objective <= warm.objective * (1.0 + 1e-6));

    const Network radial = parse_case_file(test::fixture("case2_radial.m"));
    const auto rinst = test::single_period(radial);
    const auto rrel = solve_relaxation(rinst, ConicOptions{});
    REQUIRE(rrel.ok());
    const auto rproblem = build_acopf_period(rinst, 0, {}, {});
    const auto rws = warm_start_from_socp(rproblem, rrel.point, 0);
    CHECK(rws.max_cycle_mismatch == 0.0);
    CHECK(rws.diagnostics.empty());
    const auto rsol = solve_local(rproblem, rws.x);
    REQUIRE(rsol.ok());
    CHECK(rsol.objective == doctest::Approx(rrel.solution.objective).epsilon(1e-6));
}

TEST_CASE("an overloaded network is reported as a failure") {
    Network net = parse_case_file(test::fixture("case2_radial.m"));
    net.buses[1].pd = 5.0;  // 500 MW against a 200 MW unit
    const auto inst = test::single_period(net);
    const auto problem = build_acopf_period(inst, 0, {}, {});
    LocalOptions opts;
    opts.nlp.max_iter = 80;
    const auto sol = solve_with_retry(problem, problem.flat_start(), opts);
    CHECK_FALSE(sol.ok());
    CHECK(sol.flat_start);
    const auto eval = evaluate_schedule(inst, Eigen::MatrixXd::Zero(0, 1), Eigen::MatrixXd::Zero(0, 1),
                                        nullptr, opts, 1);
    CHECK_FALSE(eval.valid);
    CHECK_FALSE(eval.failures.empty());
    const auto rel = solve_relaxation(inst, ConicOptions{});
    CHECK(rel.solution.status == ConicStatus::infeasible);
}
