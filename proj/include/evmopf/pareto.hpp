#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evmopf/conic_solver.hpp"
#include "evmopf/instance.hpp"
#include "evmopf/local_solver.hpp"
#include "evmopf/socp_builder.hpp"

namespace evmopf {

struct SolveOptions {
    ConicOptions conic;
    LocalOptions local;
    std::size_t threads = 1;
};

/// Relaxation solve of the instance with its own objective and cap.
struct RelaxationResult {
    SocpModel model;
    ConicSolution solution;
    SocpPoint point;
    double cap_slack_kg = 0.0;  ///< loosening applied to the cap to reach an interior

    bool ok() const { return solution.ok(); }
};

RelaxationResult solve_relaxation(const MopfInstance& instance, const ConicOptions& options);

/// Cost-objective relaxation with the emission cap set to `cap_kg`. A cap at the lowest
/// attainable emission leaves the relaxation without interior points; when the solve stalls
/// numerically the cap is loosened by 1e-7, 1e-6 and then 1e-5 of max(1, |cap_kg|), which
/// can only lower the bound. An infeasible cap is reported through the solution status.
RelaxationResult lower_bound_with_cap(const MopfInstance& instance, double cap_kg,
                                      const ConicOptions& options);

struct BaselineResult {
    Eigen::MatrixXd generation;  ///< per-unit, bus x period
    double cost = 0.0;
    bool valid = false;
    ScheduleEvaluation evaluation;
    RelaxationResult relaxation;  ///< no-EV relaxation used for warm starts
};

/// Cost-minimizing generation without EVs: the no-EV relaxation provides warm starts for the
/// per-period AC problems whose dispatch becomes the baseline.
BaselineResult baseline_generation(const MopfInstance& instance, const SolveOptions& options);

/// Copies the baseline into the instance for emission accounting.
void store_baseline(MopfInstance& instance, const BaselineResult& baseline);

struct EmissionBounds {
    double lbe = 0.0;
    double ube = 0.0;
    bool valid = false;
    bool degenerate = false;  ///< no EV can charge or discharge, or |ube - lbe| within tolerance
    RelaxationResult emission_relaxation;
    RelaxationResult cost_relaxation;
};

EmissionBounds emission_bounds(const MopfInstance& instance, const ConicOptions& options);

/// n linearly spaced caps from lbe to ube inclusive; the single cap max(lbe, ube) when n is 1
/// or the range is empty.
std::vector<double> cap_grid(double lbe, double ube, std::size_t n);

struct ParetoPoint {
    std::string tag = "sweep";
    double cap_kg = 0.0;
    double ub_cost = 0.0;
    double lb_cost = 0.0;
    double emission_kg = 0.0;
    double gap_pct = 0.0;
    bool valid = false;
    Eigen::MatrixXd charge;     ///< per-unit, EV slot x period
    Eigen::MatrixXd discharge;
    std::vector<double> period_cost;
    std::vector<double> period_emission_kg;
    std::vector<double> generation;  ///< per-unit total per period
    double stock_residual = 0.0;     ///< max over groups of |sum_t (eta a - b - c)|, per-unit
    std::vector<std::string> messages;
};

/// One sweep point: relaxation at the cap, fixed-schedule AC solves, then the lower bound
/// with the cap tightened to the achieved emission (never below lbe).
ParetoPoint evaluate_cap(const MopfInstance& instance, double cap_kg, double lbe,
                         const SolveOptions& options);

/// Midnight-charging schedule evaluated through the same per-period AC solves.
ParetoPoint evaluate_benchmark(const MopfInstance& instance, const SolveOptions& options,
                               const SocpPoint* warm_start);

double stock_conservation_residual(const MopfInstance& instance, const Eigen::MatrixXd& charge,
                                   const Eigen::MatrixXd& discharge);

struct PercentChange {
    double cost_pct = 0.0;
    double emission_pct = 0.0;
};

/// cost: 100 (cost_with / cost_without - 1); emission: 100 (emission / gasoline - 1).
/// Throws std::invalid_argument when a baseline is not positive.
PercentChange percent_changes(double cost_with, double cost_without, double emission_kg,
                              double gasoline_kg);

/// g CO2 per mile times miles, in kg.
double gasoline_emission_kg(double grams_per_mile, double miles);

struct ParetoOptions {
    std::size_t points = 10;
    bool include_benchmark = false;
    SolveOptions solve;
};

struct ParetoRun {
    BaselineResult baseline;
    EmissionBounds bounds;
    std::vector<ParetoPoint> points;
    std::optional<ParetoPoint> benchmark;
    std::vector<Diagnostic> warnings;
};

/// Full sweep. `instance` receives the baseline generation.
ParetoRun run_pareto(MopfInstance& instance, const ParetoOptions& options);

/// Frontier CSV with header
/// cap_kg,ub_cost,lb_cost,emission_kg,gap_pct,cost_change_pct,emission_change_pct,valid,tag
/// Percent columns are left empty when the matching baseline is not positive.
std::string frontier_csv(const std::vector<ParetoPoint>& points, double no_ev_cost,
                         double gasoline_kg);

/// period,gen_excl_ev,gen_for_ev,v2g_power in MW.
std::string hourly_csv(const MopfInstance& instance, const ParetoPoint& point);

}  // namespace evmopf
