#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evmopf/acopf_period.hpp"
#include "evmopf/instance.hpp"
#include "evmopf/nlp_solver.hpp"
#include "evmopf/socp_builder.hpp"

namespace evmopf {

struct WarmStart {
    Eigen::VectorXd x;  ///< in AcopfPeriod variable order
    std::vector<Diagnostic> diagnostics;  ///< angle mismatch on lines outside the spanning tree
    double max_cycle_mismatch = 0.0;      ///< radians
};

/// |V| = sqrt(c_ii); angles propagated over a breadth-first spanning tree rooted at the
/// reference bus using theta_i - theta_j = atan2(-s_ij, c_ij); dispatch copied from the
/// relaxation and clipped to its bounds.
WarmStart warm_start_from_socp(const AcopfPeriod& problem, const SocpPoint& point, std::size_t t);

struct LocalOptions {
    NlpOptions nlp;
    double residual_tol = 1e-6;  ///< per-unit, on balance, flow and angle limits
    bool retry_flat_start = true;
};

struct PeriodSolution {
    NlpStatus status = NlpStatus::restoration_failure;
    Eigen::VectorXd vm, va, pg, qg;
    Eigen::VectorXd pij, qij, pji, qji;  ///< per line
    double objective = 0.0;
    PeriodResiduals residuals;
    int iterations = 0;
    bool flat_start = false;  ///< true when the result came from the flat-start retry
    std::string message;

    bool ok() const { return status == NlpStatus::converged; }
};

/// Projects `start` onto the bounds, solves, and checks the residuals of the final point.
PeriodSolution solve_local(const AcopfPeriod& problem, const Eigen::VectorXd& start,
                           const LocalOptions& options = {});

/// Solves from `start`, retrying once from the flat start when allowed.
PeriodSolution solve_with_retry(const AcopfPeriod& problem, const Eigen::VectorXd& start,
                                const LocalOptions& options = {});

/// Per-unit EV schedule, EV slot x period.
struct ChargingSchedule {
    Eigen::MatrixXd charge;
    Eigen::MatrixXd discharge;
    Eigen::MatrixXd stock;  ///< EV slot x (period + 1)
    bool feasible = true;
    std::vector<Diagnostic> issues;
};

/// Stock trajectory implied by a schedule, starting from each group's initial charge.
Eigen::MatrixXd stock_trajectory(const MopfInstance& instance, const Eigen::MatrixXd& charge,
                                 const Eigen::MatrixXd& discharge);

/// Closes each group's energy balance sum_t (eta a - b) = sum_t c exactly, within the rate
/// limits: a shortfall first trims discharging and then adds charging, a surplus does the
/// reverse, taking the periods with the most room first. Returns the largest remaining
/// imbalance (nonzero only when the rate limits cannot absorb it).
double conserve_energy(const MopfInstance& instance, Eigen::MatrixXd& charge,
                       Eigen::MatrixXd& discharge);

/// Charging that starts at midnight: a_t = min(a_bar_t, remaining / eta) from period 0 until
/// the stored energy covers the day's driving; no discharging. Uncovered demand and stock
/// bound violations are reported as issues and clear `feasible`.
ChargingSchedule benchmark_charging(const MopfInstance& instance);

struct ScheduleEvaluation {
    std::vector<PeriodSolution> periods;
    bool valid = false;
    double cost = 0.0;           ///< sum of period objectives
    double emission_kg = 0.0;    ///< sum_t e_t * base * (generation_t - baseline_t)
    std::vector<double> period_cost;
    std::vector<double> period_emission_kg;
    std::vector<double> generation;  ///< total real generation per period, per-unit
    std::vector<Diagnostic> failures;
};

/// Solves the T single-period problems with the schedule fixed, using up to `threads`
/// workers. Warm starts come from `relaxation` when given, otherwise from the flat start.
/// Results are reduced in period order.
ScheduleEvaluation evaluate_schedule(const MopfInstance& instance, const Eigen::MatrixXd& charge,
                                     const Eigen::MatrixXd& discharge,
                                     const SocpPoint* relaxation, const LocalOptions& options,
                                     std::size_t threads);

}  // namespace evmopf
