#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace evmopf {

/// min f(x)  s.t.  g(x) = 0,  h(x) <= 0,  lo <= x <= hi.
/// Jacobians are (constraints x variables); the Hessian is the full symmetric matrix of
/// objective_factor * f + lambda'g + mu'h.
class NonlinearProgram {
public:
    virtual ~NonlinearProgram() = default;

    virtual std::size_t num_variables() const = 0;
    virtual std::size_t num_equalities() const = 0;
    virtual std::size_t num_inequalities() const = 0;
    virtual void bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const = 0;
    virtual double objective(const Eigen::VectorXd& x, Eigen::VectorXd* gradient) const = 0;
    virtual void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::VectorXd& h,
                             Eigen::SparseMatrix<double>* jac_g,
                             Eigen::SparseMatrix<double>* jac_h) const = 0;
    virtual Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x, double objective_factor,
                                                const Eigen::VectorXd& lambda,
                                                const Eigen::VectorXd& mu) const = 0;
};

enum class NlpStatus { converged, iteration_limit, restoration_failure, residual_check_failed };

std::string to_string(NlpStatus status);

struct NlpOptions {
    double feas_tol = 1e-10;
    double grad_tol = 1e-8;
    double comp_tol = 1e-9;
    double cost_tol = 1e-10;
    int max_iter = 200;
    double xi = 0.99995;     ///< fraction-to-boundary factor
    double sigma = 0.1;      ///< centering parameter
    double z0 = 1.0;         ///< initial slack
    double cost_scale = 1.0; ///< objective multiplier used inside the iteration
    bool verbose = false;
};

struct NlpResult {
    NlpStatus status = NlpStatus::restoration_failure;
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;  ///< nonlinear equality multipliers
    Eigen::VectorXd mu;      ///< nonlinear inequality multipliers
    double objective = 0.0;
    int iterations = 0;
    double feas_cond = 0.0;
    double grad_cond = 0.0;
    double comp_cond = 0.0;
    std::string message;

    bool ok() const { return status == NlpStatus::converged; }
};

/// Primal-dual interior-point method with slack variables for the inequalities and a
/// Newton step on the perturbed KKT conditions. Bounds are handled as linear inequalities
/// (equal bounds as equalities). The returned point is clipped to the variable bounds.
NlpResult solve_nlp(const NonlinearProgram& problem, const Eigen::VectorXd& x0,
                    const NlpOptions& options = {});

}  // namespace evmopf
