#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "evmopf/instance.hpp"
#include "evmopf/network.hpp"
#include "evmopf/nlp_solver.hpp"

namespace evmopf {

/// Single-period polar AC-OPF with a fixed EV schedule.
///
/// Variables x = [theta (N), |V| (N), pg (G), qg (G)]. Equalities are the real and reactive
/// bus balances (reference angle is fixed through its bounds). Inequalities are the squared
/// apparent-power limits at both line ends and the linear angle-difference limits.
/// Line flows are not variables; they are evaluated from the voltages.
class AcopfPeriod : public NonlinearProgram {
public:
    /// `ev_injection` holds -a + eta * b per bus, per-unit.
    AcopfPeriod(const Network& network, Eigen::VectorXd pd, Eigen::VectorXd qd,
                Eigen::VectorXd ev_injection);

    std::size_t num_variables() const override;
    std::size_t num_equalities() const override;
    std::size_t num_inequalities() const override;
    void bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const override;
    double objective(const Eigen::VectorXd& x, Eigen::VectorXd* gradient) const override;
    void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::VectorXd& h,
                     Eigen::SparseMatrix<double>* jac_g,
                     Eigen::SparseMatrix<double>* jac_h) const override;
    Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x, double objective_factor,
                                        const Eigen::VectorXd& lambda,
                                        const Eigen::VectorXd& mu) const override;

    std::size_t va(std::size_t bus) const { return bus; }
    std::size_t vm(std::size_t bus) const { return nb_ + bus; }
    std::size_t pg(std::size_t gen) const { return 2 * nb_ + gen; }
    std::size_t qg(std::size_t gen) const { return 2 * nb_ + ng_ + gen; }

    const Network& network() const { return network_; }
    const Eigen::VectorXd& pd() const { return pd_; }
    const Eigen::VectorXd& qd() const { return qd_; }
    const Eigen::VectorXd& ev_injection() const { return ev_; }
    /// Lines with a finite apparent-power limit, in the order of their inequality pairs.
    const std::vector<std::size_t>& limited_lines() const { return limited_; }

    /// Flat start |V| = 1, theta = 0, dispatch at the middle of its range.
    Eigen::VectorXd flat_start() const;

private:
    const Network& network_;
    Eigen::VectorXd pd_, qd_, ev_;
    std::size_t nb_, ng_, nl_;
    std::size_t ref_;
    std::vector<std::size_t> limited_;
    std::vector<std::vector<std::size_t>> gens_at_;
};

/// Fixed per-EV-slot schedule of one period, per-unit.
AcopfPeriod build_acopf_period(const MopfInstance& instance, std::size_t t,
                               const std::vector<double>& charge,
                               const std::vector<double>& discharge);

struct PeriodResiduals {
    double balance = 0.0;     ///< largest |P| or |Q| mismatch
    double flow_limit = 0.0;  ///< largest excess of |S| over the limit
    double angle = 0.0;       ///< largest excess of |theta_i - theta_j| over the limit
    double bounds = 0.0;      ///< largest bound violation
    double reference = 0.0;   ///< |theta_ref|

    double max() const;
};

PeriodResiduals period_residuals(const AcopfPeriod& problem, const Eigen::VectorXd& x);

}  // namespace evmopf
