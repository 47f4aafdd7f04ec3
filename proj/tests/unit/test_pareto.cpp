#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "evmopf/pareto.hpp"
#include "test_support.hpp"

using namespace evmopf;

namespace {

ParetoRun sweep(const std::string& file, std::size_t points, std::size_t threads = 1,
                const test::FixtureOptions& o = {}) {
    auto inst = test::fixture_instance(file, o);
    ParetoOptions opts;
    opts.points = points;
    opts.include_benchmark = true;
    opts.solve.threads = threads;
    return run_pareto(inst, opts);
}

bool has_warning(const ParetoRun& run, const std::string& code) {
    for (const auto& w : run.warnings) {
        if (w.code == code) {
            return true;
        }
    }
    return false;
}

std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

}  // namespace

TEST_CASE("cap grid") {
    const auto caps = cap_grid(-100.0, 350.0, 10);
    REQUIRE(caps.size() == 10);
    CHECK(caps.front() == -100.0);
    CHECK(caps.back() == 350.0);
    for (std::size_t k = 1; k < caps.size(); ++k) {
        CHECK(caps[k] > caps[k - 1]);
        CHECK(caps[k] - caps[k - 1] == doctest::Approx(50.0).epsilon(1e-12));
    }
    CHECK(cap_grid(5.0, 7.0, 1) == std::vector<double>{7.0});
    CHECK(cap_grid(5.0, 5.0, 4) == std::vector<double>{5.0});
    CHECK(cap_grid(5.0, 4.0, 4) == std::vector<double>{5.0});
    CHECK(cap_grid(0.0, 1.0, 2) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("percent changes and gasoline emission") {
    const auto pc = percent_changes(110.0, 100.0, 30.0, 120.0);
    CHECK(pc.cost_pct == doctest::Approx(10.0));
    CHECK(pc.emission_pct == doctest::Approx(-75.0));
    CHECK_THROWS_AS(percent_changes(1.0, 0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(percent_changes(1.0, 1.0, 1.0, -2.0), std::invalid_argument);
    CHECK(gasoline_emission_kg(400.0, 1000.0) == doctest::Approx(400.0));
}

TEST_CASE("frontier CSV leaves undefined numbers empty") {
    ParetoPoint ok;
    ok.cap_kg = 10.0;
    ok.ub_cost = 110.0;
    ok.lb_cost = 109.5;
    ok.emission_kg = 9.5;
    ok.gap_pct = 100.0 * (1.0 - 109.5 / 110.0);
    ok.valid = true;
    ParetoPoint bad;
    bad.tag = "benchmark";
    bad.cap_kg = std::numeric_limits<double>::quiet_NaN();
    bad.ub_cost = std::numeric_limits<double>::quiet_NaN();
    bad.lb_cost = std::numeric_limits<double>::quiet_NaN();
    bad.emission_kg = std::numeric_limits<double>::quiet_NaN();
    bad.gap_pct = std::numeric_limits<double>::quiet_NaN();
    std::istringstream csv(frontier_csv({ok, bad}, 100.0, 0.0));
    std::string header, first, second;
    std::getline(csv, header);
    std::getline(csv, first);
    std::getline(csv, second);
    CHECK(header == "cap_kg,ub_cost,lb_cost,emission_kg,gap_pct,cost_change_pct,emission_change_pct,valid,tag");
    const auto a = csv_fields(first);
    REQUIRE(a.size() == 9);
    CHECK(std::stod(a[1]) == 110.0);
    CHECK(std::stod(a[5]) == doctest::Approx(10.0));
    CHECK(a[6].empty());
    CHECK(a[7] == "true");
    CHECK(a[8] == "sweep");
    CHECK(second == ",,,,,,,false,benchmark");
}

TEST_CASE("three-bus sweep: bounds, monotone caps and determinism") {
    const auto run = sweep("case3_triangle.m", 4);
    REQUIRE(run.bounds.valid);
    CHECK_FALSE(run.bounds.degenerate);
    CHECK(run.bounds.lbe < run.bounds.ube);
    REQUIRE(run.points.size() == 4);
    for (std::size_t k = 0; k < run.points.size(); ++k) {
        const auto& p = run.points[k];
        CHECK(p.valid);
        CHECK(p.lb_cost <= p.ub_cost * (1.0 + 1e-9));
        CHECK(p.gap_pct >= -1e-9);
        CHECK(p.stock_residual <= 1e-6);
        if (k > 0) {
            CHECK(p.cap_kg > run.points[k - 1].cap_kg);
        }
    }
    REQUIRE(run.benchmark);
    CHECK(run.benchmark->tag == "benchmark");

    // Relaxation cost can only fall as the cap loosens.
    const auto inst = test::fixture_instance("case3_triangle.m");
    MopfInstance with_base = inst;
    store_baseline(with_base, run.baseline);
    double previous = std::numeric_limits<double>::infinity();
    for (double cap : cap_grid(run.bounds.lbe, run.bounds.ube, 6)) {
        const auto r = lower_bound_with_cap(with_base, cap, ConicOptions{});
        REQUIRE(r.ok());
        CHECK(r.solution.objective <= previous + 1e-6 * std::abs(previous));
        previous = r.solution.objective;
    }

    const auto again = sweep("case3_triangle.m", 4, 2);
    const double no_ev = run.baseline.cost;
    CHECK(frontier_csv(run.points, no_ev, 1000.0) == frontier_csv(again.points, no_ev, 1000.0));
    MopfInstance i1 = with_base;
    CHECK(hourly_csv(i1, run.points[1]) == hourly_csv(i1, again.points[1]));
}

TEST_CASE("hourly output splits generation into load and EV charging") {
    const auto run = sweep("case3_triangle.m", 2);
    auto inst = test::fixture_instance("case3_triangle.m");
    const auto& p = run.points.back();
    std::istringstream csv(hourly_csv(inst, p));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "period,gen_excl_ev,gen_for_ev,v2g_power");
    std::size_t t = 0;
    while (std::getline(csv, line)) {
        const auto f = csv_fields(line);
        REQUIRE(f.size() == 4);
        CHECK(std::stoul(f[0]) == t);
        CHECK(std::stod(f[1]) + std::stod(f[2]) == doctest::Approx(100.0 * p.generation[t]).epsilon(1e-9));
        CHECK(std::stod(f[2]) >= 0.0);
        CHECK(std::stod(f[3]) >= 0.0);
        ++t;
    }
    CHECK(t == inst.horizon());
}

TEST_CASE("no EVs give a degenerate single-point frontier") {
    test::FixtureOptions o;
    o.ev = false;
    const auto run = sweep("case3_triangle.m", 5, 1, o);
    CHECK(run.bounds.degenerate);
    REQUIRE(run.points.size() == 1);
    CHECK(run.points[0].valid);
    CHECK(has_warning(run, "degenerate frontier"));
}

TEST_CASE("uniform emission factors: emission tracks the energy balance") {
    test::FixtureOptions o;
    o.emission_file = "emission_uniform.csv";
    auto inst = test::fixture_instance("case2_radial.m", o);
    const auto base = baseline_generation(inst, SolveOptions{});
    REQUIRE(base.valid);
    store_baseline(inst, base);
    const auto bounds = emission_bounds(inst, ConicOptions{});
    REQUIRE(bounds.valid);
    const auto& rel = bounds.emission_relaxation;
    double extra_gen = 0.0;
    double ev_draw = 0.0;
    for (std::size_t t = 0; t < inst.horizon(); ++t) {
        const auto tt = static_cast<Eigen::Index>(t);
        extra_gen += rel.point.pg.col(tt).sum() - inst.baseline_total(t);
        for (std::size_t k = 0; k < inst.ev.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            ev_draw += rel.point.a(kk, tt) - inst.ev[k].efficiency * rel.point.b(kk, tt);
        }
    }
    const double kg_per_pu = 500.0 * inst.network.base_mva;
    CHECK(bounds.lbe == doctest::Approx(kg_per_pu * extra_gen).epsilon(1e-7));
    // On a radial network the relaxation is exact and the EV draw costs at least itself.
    CHECK(extra_gen >= ev_draw - 1e-8);
    CHECK(extra_gen <= 1.2 * ev_draw);
    CHECK(bounds.lbe <= bounds.ube + 1e-6 * std::abs(bounds.ube));
}

TEST_CASE("five-bus sweep improves on midnight charging") {
    const auto run = sweep("case5_meshed.m", 10);
    REQUIRE(run.benchmark);
    REQUIRE(run.benchmark->valid);
    std::size_t valid = 0;
    bool dominates = false;
    for (const auto& p : run.points) {
        valid += p.valid ? 1 : 0;
        CHECK(p.gap_pct >= -1e-9);
        if (p.valid && p.ub_cost <= run.benchmark->ub_cost &&
            p.emission_kg <= run.benchmark->emission_kg) {
            dominates = true;
        }
    }
    CHECK(valid == run.points.size());
    CHECK(dominates);
}
