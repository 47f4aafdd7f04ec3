#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace evmopf {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Generator cost f(p) = quadratic * p^2 + linear * p + constant, with p in per-unit
/// and f in the case file's currency per hour.
struct CostPolynomial {
    double quadratic = 0.0;
    double linear = 0.0;
    double constant = 0.0;

    double operator()(double p) const { return (quadratic * p + linear) * p + constant; }
    double derivative(double p) const { return 2.0 * quadratic * p + linear; }
    bool is_convex() const { return quadratic >= 0.0; }
    /// True when the marginal operating cost is zero everywhere.
    bool is_zero_operating() const { return quadratic == 0.0 && linear == 0.0; }
};

struct Bus {
    int id = 0;              ///< identifier used in the case file
    int type = 1;            ///< 1 PQ, 2 PV, 3 reference
    double gs = 0.0;         ///< shunt conductance g_ii, per-unit
    double bs = 0.0;         ///< shunt susceptance b_ii, per-unit
    double v_min = 0.9;
    double v_max = 1.1;
    double pd = 0.0;         ///< base real load, per-unit
    double qd = 0.0;         ///< base reactive load, per-unit
    double base_kv = 0.0;
    std::vector<std::size_t> lines;  ///< incident line indices
};

struct Generator {
    std::size_t bus = 0;  ///< internal bus index
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double p_set = 0.0;  ///< setpoint from the case file (informational)
    double q_set = 0.0;
    double v_set = 1.0;
    CostPolynomial cost;
};

/// Pi-model branch terms.
///
/// Sign convention: the mutual terms are stored "series-style", i.e. as the negated
/// off-diagonal bus-admittance entries, G_ij + jB_ij = -Y_ft and G_ji + jB_ji = -Y_tf.
/// For an untapped line they equal the series admittance 1/(r + jx), so r=0, x=1 gives
/// B_ij = B_ji = -1. The self terms are Y_ff and Y_tt including half the line charging.
///
/// With c_ii = |V_i|^2, c_ij = |V_i||V_j|cos(th_i - th_j), s_ij = -|V_i||V_j|sin(th_i - th_j):
///   p_ij =  g_ff c_ii - G_ij c_ij + B_ij s_ij      q_ij = -b_ff c_ii + B_ij c_ij + G_ij s_ij
///   p_ji =  g_tt c_jj - G_ji c_ij - B_ji s_ij      q_ji = -b_tt c_jj + B_ji c_ij - G_ji s_ij
struct BranchAdmittance {
    double g_ij = 0.0;
    double b_ij = 0.0;
    double g_ji = 0.0;
    double b_ji = 0.0;
    double g_ff = 0.0;
    double b_ff = 0.0;
    double g_tt = 0.0;
    double b_tt = 0.0;
};

struct Line {
    std::size_t from = 0;  ///< internal bus index
    std::size_t to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charge = 0.0;
    double tap = 1.0;
    double shift = 0.0;        ///< radians
    double s_max = kInf;       ///< per-unit apparent power, +inf when unlimited
    double angle_max = 1.5707963267948966;  ///< symmetric bound on |th_i - th_j|, radians
    BranchAdmittance y;
};

struct Network {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Generator> generators;
    std::vector<Line> lines;

    std::size_t reference_bus() const;
    /// Internal index of the bus with the given case-file id; throws if absent.
    std::size_t bus_index(int id) const;
    /// Load set: buses with nonzero real load, in bus order.
    std::vector<std::size_t> load_buses() const;
    std::vector<std::vector<std::size_t>> generators_at_bus() const;
    double total_load_p() const;
    double total_load_q() const;
};

/// Throws std::invalid_argument for r^2 + x^2 == 0 or tap <= 0.
BranchAdmittance build_admittance(double r, double x, double b_charge, double tap, double shift);

struct BranchFlows {
    double p_ij = 0.0;
    double q_ij = 0.0;
    double p_ji = 0.0;
    double q_ji = 0.0;
};

/// Flows at both ends of a line from the lifted voltage products.
BranchFlows branch_flows(const BranchAdmittance& y, double cii, double cjj, double cij, double sij);

/// Same, from polar voltages.
BranchFlows branch_flows_polar(const BranchAdmittance& y, double vi, double vj, double theta_i,
                               double theta_j);

struct Diagnostic {
    std::string code;
    std::string message;
};

/// Empty iff every type invariant holds and the network graph is connected.
std::vector<Diagnostic> validate(const Network& network);

/// Rebuilds the per-bus incidence lists from the line endpoints.
void rebuild_incidence(Network& network);

}  // namespace evmopf
