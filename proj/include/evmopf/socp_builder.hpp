#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "evmopf/conic_program.hpp"
#include "evmopf/instance.hpp"

namespace evmopf {

constexpr std::size_t kNoColumn = std::numeric_limits<std::size_t>::max();

/// Column indices of one period. `z` bounds pg^2 and is kNoColumn for generators with linear
/// cost.
struct PeriodColumns {
    std::vector<std::size_t> pg, qg, z;            // per generator
    std::vector<std::size_t> cii;                  // per bus
    std::vector<std::size_t> cij, sij;             // per line
    std::vector<std::size_t> pij, qij, pji, qji;   // per line
    std::vector<std::size_t> a, b;                 // per EV bus slot
};

struct SocpLayout {
    std::vector<PeriodColumns> periods;
    std::vector<std::vector<std::size_t>> stock;  ///< per EV bus slot, T+1 boundaries
    std::size_t num_variables = 0;
};

struct SocpModel {
    ConicProgram program;
    SocpLayout layout;
    std::optional<std::size_t> emission_row;
};

/// Closed-form column count:
///   T * (2G + N + 6L + 2E + Q) + (T + 1) * E
/// with G generators, N buses, L lines, E EV buses and Q generators with a quadratic cost
/// term (Q is zero for the emission objective).
std::size_t socp_variable_count(const MopfInstance& instance);

/// Builds the relaxation for the instance's objective and emission cap.
/// Throws std::invalid_argument for a nonconvex cost.
SocpModel build_socp(const MopfInstance& instance);

/// Primal values of a relaxation solution in model units (per-unit), arranged by entity.
struct SocpPoint {
    Eigen::MatrixXd pg, qg;    ///< generator x period
    Eigen::MatrixXd cii;       ///< bus x period
    Eigen::MatrixXd cij, sij;  ///< line x period
    Eigen::MatrixXd pij, qij, pji, qji;
    Eigen::MatrixXd a, b;      ///< EV slot x period
    Eigen::MatrixXd stock;     ///< EV slot x (period + 1)

    std::vector<double> generation_per_period() const;
};

SocpPoint extract_point(const SocpModel& model, const std::vector<double>& x);

/// sum_t sum_g cost(pg) in the case file's currency.
double generation_cost(const MopfInstance& instance, const Eigen::MatrixXd& pg);

struct ConsistencyStats {
    Eigen::MatrixXd residual;  ///< c_ii c_jj - c_ij^2 - s_ij^2, line x period
    double max_residual = 0.0;
    double mean_residual = 0.0;
    double min_residual = 0.0;
    double scale = 0.0;        ///< max c_ii c_jj
    bool exact = false;        ///< max_residual <= 1e-6 * scale
};

ConsistencyStats consistency_residuals(const MopfInstance& instance, const SocpPoint& point);

/// A point of the original model: voltages, angles and dispatch per period plus the EV
/// schedule. Matrices are entity x period; stock is EV slot x (period + 1).
struct PolarTrajectory {
    Eigen::MatrixXd vm, va, pg, qg;
    Eigen::MatrixXd a, b, stock;
};

/// Maps an original-model point into the relaxation's columns (flows computed from the
/// voltages, cost epigraph columns set to their minimum).
std::vector<double> lift_to_socp(const MopfInstance& instance, const SocpModel& model,
                                 const PolarTrajectory& point);

}  // namespace evmopf
