#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "evmopf/network.hpp"

namespace evmopf {

/// sum_k coef_k * x[index_k] + constant
struct AffineExpr {
    std::vector<std::pair<std::size_t, double>> terms;
    double constant = 0.0;

    AffineExpr() = default;
    explicit AffineExpr(double c) : constant(c) {}
    AffineExpr& add(std::size_t var, double coef) {
        terms.emplace_back(var, coef);
        return *this;
    }
    static AffineExpr variable(std::size_t var, double coef = 1.0) {
        AffineExpr e;
        e.add(var, coef);
        return e;
    }
    double evaluate(const std::vector<double>& x) const;
};

/// lower <= sum_k coef_k * x[index_k] <= upper, either side may be infinite.
struct LinearRow {
    std::vector<std::pair<std::size_t, double>> terms;
    double lower = -kInf;
    double upper = kInf;
    std::string name;
};

enum class ConeKind {
    second_order,  ///< entries (t, w...):   t >= ||w||
    rotated,       ///< entries (u, v, w...): 2 u v >= ||w||^2, u, v >= 0
};

struct ConeBlock {
    ConeKind kind = ConeKind::second_order;
    std::vector<AffineExpr> entries;
    std::string name;
};

/// min objective'x + offset  s.t. rows, cones, lb <= x <= ub.
struct ConicProgram {
    std::vector<std::string> names;
    std::vector<double> lb;
    std::vector<double> ub;
    std::vector<double> objective;
    double offset = 0.0;
    /// Optional per-variable boxes known to contain an optimal point (for example bounds
    /// implied by the rows and cones). Used only by the certified bound; empty means lb/ub.
    /// Not part of the text form.
    std::vector<double> implied_lb;
    std::vector<double> implied_ub;
    std::vector<LinearRow> rows;
    std::vector<ConeBlock> cones;

    std::size_t num_variables() const { return names.size(); }
    std::size_t add_variable(std::string name, double lower, double upper, double cost = 0.0);
    void add_row(LinearRow row) { rows.push_back(std::move(row)); }
    void add_cone(ConeBlock cone) { cones.push_back(std::move(cone)); }

    double evaluate_objective(const std::vector<double>& x) const;
    /// Largest violation of bounds, rows and cones at x (zero when feasible).
    double max_violation(const std::vector<double>& x) const;
    /// Throws std::invalid_argument on out-of-range indices, crossed bounds, NaN data or
    /// cones with too few entries.
    void check() const;
};

/// Sparse text form, one record per line:
///   CONIC_PROGRAM <variables> <rows> <cones>
///   OFFSET <value>
///   v <index> <name> <lb> <ub> <cost>
///   r <index> <lower> <upper> <name>
///   A <row> <var> <coef>
///   k <index> <SOC|RSOC> <entries> <name>
///   K <cone> <entry> <var|-1> <coef|constant>
/// Cone entry constants are written as `K c e -1 value`. Infinite bounds read as inf/-inf.
std::string export_conic_program(const ConicProgram& program);
ConicProgram import_conic_program(const std::string& text);

/// `name value` per line, 17 significant digits.
std::string dump_solution(const ConicProgram& program, const std::vector<double>& x);

}  // namespace evmopf
