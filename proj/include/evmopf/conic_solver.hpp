#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "evmopf/conic_program.hpp"

namespace evmopf {

enum class ConicStatus { optimal, infeasible, unbounded, numerical_limit };

std::string to_string(ConicStatus status);

struct ConicOptions {
    double tol_rel = 1e-8;   ///< relative duality gap
    double tol_abs = 1e-8;   ///< absolute duality gap
    double tol_feas = 1e-8;  ///< relative primal and dual residuals
    int max_iter = 100;
    int equilibration_passes = 15;
    bool verbose = false;
};

/// Problem in solver form: min c'x  s.t.  A x = b,  G x + s = h,  s in K, where K is the
/// nonnegative orthant of dimension `lp` followed by second-order cones of sizes
/// `soc_dims`. Bounds, rows and cone entries of a ConicProgram map onto A and G.
struct StandardForm {
    Eigen::SparseMatrix<double> A;
    Eigen::SparseMatrix<double> G;
    Eigen::VectorXd b, h, c;
    std::size_t lp = 0;
    std::vector<std::size_t> soc_dims;
    double offset = 0.0;

    /// Index in the A rows of each program equality row (or npos), and likewise for
    /// lower / upper sides in the G rows.
    std::vector<std::size_t> row_eq, row_lower, row_upper;
};

StandardForm to_standard_form(const ConicProgram& program);

struct ConicSolution {
    ConicStatus status = ConicStatus::numerical_limit;
    std::vector<double> x;
    Eigen::VectorXd y;  ///< multipliers of the A rows
    Eigen::VectorXd z;  ///< multipliers of the G rows
    double objective = 0.0;       ///< primal objective including the offset
    double dual_objective = 0.0;  ///< dual objective including the offset
    /// Lower bound on the optimal value that survives the residual dual infeasibility: the dual
    /// objective with z projected onto the cone, less the worst case of the remaining
    /// residual r = c + A'y + G'z over the variable boxes. -inf when a column with a nonzero
    /// residual has no finite box on the relevant side. Set by solve_conic for optimal runs.
    double certified_bound = -kInf;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
    double seconds = 0.0;
    std::string message;

    bool ok() const { return status == ConicStatus::optimal; }
    /// Multiplier of a program row (sum of the equality and both inequality sides, with
    /// the sign convention d(objective)/d(bound)).
    double row_dual(const StandardForm& form, std::size_t row) const;
};

ConicSolution solve_conic(const ConicProgram& program, const ConicOptions& options = {});

/// The certified bound described on ConicSolution for multipliers (y, z) of `form`.
double certified_lower_bound(const ConicProgram& program, const StandardForm& form,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& z);
ConicSolution solve_standard_form(const StandardForm& form, const ConicOptions& options = {});

}  // namespace evmopf
