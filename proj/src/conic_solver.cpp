#include "evmopf/conic_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace evmopf {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

std::string to_string(ConicStatus status) {
    switch (status) {
        case ConicStatus::optimal:
            return "optimal";
        case ConicStatus::infeasible:
            return "infeasible";
        case ConicStatus::unbounded:
            return "unbounded";
        case ConicStatus::numerical_limit:
            return "numerical-limit";
    }
    return "unknown";
}

StandardForm to_standard_form(const ConicProgram& program) {
    program.check();
    const std::size_t n = program.num_variables();
    StandardForm f;
    f.offset = program.offset;
    std::vector<Triplet> a_trip;
    std::vector<Triplet> g_trip;
    std::vector<double> b;
    std::vector<double> h;

    for (std::size_t j = 0; j < n; ++j) {
        const double lo = program.lb[j];
        const double hi = program.ub[j];
        if (lo == hi) {
            a_trip.emplace_back(static_cast<int>(b.size()), static_cast<int>(j), 1.0);
            b.push_back(lo);
            continue;
        }
        if (std::isfinite(lo)) {
            g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j), -1.0);
            h.push_back(-lo);
        }
        if (std::isfinite(hi)) {
            g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j), 1.0);
            h.push_back(hi);
        }
    }
    const std::size_t nrows = program.rows.size();
    f.row_eq.assign(nrows, kNone);
    f.row_lower.assign(nrows, kNone);
    f.row_upper.assign(nrows, kNone);
    for (std::size_t r = 0; r < nrows; ++r) {
        const auto& row = program.rows[r];
        if (row.lower == row.upper) {
            f.row_eq[r] = b.size();
            for (const auto& [j, c] : row.terms) {
                a_trip.emplace_back(static_cast<int>(b.size()), static_cast<int>(j), c);
            }
            b.push_back(row.lower);
            continue;
        }
        if (std::isfinite(row.lower)) {
            f.row_lower[r] = h.size();
            for (const auto& [j, c] : row.terms) {
                g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j), -c);
            }
            h.push_back(-row.lower);
        }
        if (std::isfinite(row.upper)) {
            f.row_upper[r] = h.size();
            for (const auto& [j, c] : row.terms) {
                g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j), c);
            }
            h.push_back(row.upper);
        }
    }
    f.lp = h.size();
    // Cone entries e_k(x) = a_k'x + c_k become rows -a_k'x + s_k = c_k. Rotated cones use
    // s = ((u + v) / sqrt2, (u - v) / sqrt2, w) which is a standard second-order cone.
    const double r2 = 1.0 / std::sqrt(2.0);
    for (const auto& cone : program.cones) {
        const std::size_t start = h.size();
        if (cone.kind == ConeKind::second_order) {
            for (const auto& e : cone.entries) {
                for (const auto& [j, c] : e.terms) {
                    g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j), -c);
                }
                h.push_back(e.constant);
            }
        } else {
            const auto& u = cone.entries[0];
            const auto& v = cone.entries[1];
            for (double sign : {1.0, -1.0}) {
                for (const auto& [j, c] : u.terms) {
                    g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j), -r2 * c);
                }
                for (const auto& [j, c] : v.terms) {
                    g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j),
                                        -sign * r2 * c);
                }
                h.push_back(r2 * (u.constant + sign * v.constant));
            }
            for (std::size_t k = 2; k < cone.entries.size(); ++k) {
                for (const auto& [j, c] : cone.entries[k].terms) {
                    g_trip.emplace_back(static_cast<int>(h.size()), static_cast<int>(j), -c);
                }
                h.push_back(cone.entries[k].constant);
            }
        }
        f.soc_dims.push_back(h.size() - start);
    }
    f.A.resize(static_cast<Eigen::Index>(b.size()), static_cast<Eigen::Index>(n));
    f.A.setFromTriplets(a_trip.begin(), a_trip.end());
    f.G.resize(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(n));
    f.G.setFromTriplets(g_trip.begin(), g_trip.end());
    f.b = Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
    f.h = Eigen::Map<const Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
    f.c = Eigen::Map<const Vec>(program.objective.data(), static_cast<Eigen::Index>(n));
    return f;
}

double ConicSolution::row_dual(const StandardForm& form, std::size_t row) const {
    double d = 0.0;
    if (form.row_eq[row] != kNone && y.size() > 0) {
        d -= y[static_cast<Eigen::Index>(form.row_eq[row])];
    }
    if (form.row_upper[row] != kNone && z.size() > 0) {
        d -= z[static_cast<Eigen::Index>(form.row_upper[row])];
    }
    if (form.row_lower[row] != kNone && z.size() > 0) {
        d += z[static_cast<Eigen::Index>(form.row_lower[row])];
    }
    return d;
}

namespace {

/// Cone geometry of K = R+^lp x SOC(q_1) x ... in solver coordinates.
struct Cones {
    std::size_t lp = 0;
    std::vector<std::size_t> start;  ///< offset of each second-order cone
    std::vector<std::size_t> dim;
    std::size_t total = 0;

    std::size_t degree() const { return lp + dim.size(); }
};

double soc_det(const Vec& u, std::size_t o, std::size_t q) {
    const double t = u[static_cast<Eigen::Index>(o)];
    const double w = u.segment(static_cast<Eigen::Index>(o + 1), static_cast<Eigen::Index>(q - 1))
                         .squaredNorm();
    return t * t - w;
}

/// Smallest margin of u against the cone boundary: min(u_lp, u0 - ||u1||).
double cone_margin(const Cones& k, const Vec& u) {
    double m = kInf;
    for (std::size_t i = 0; i < k.lp; ++i) {
        m = std::min(m, u[static_cast<Eigen::Index>(i)]);
    }
    for (std::size_t c = 0; c < k.dim.size(); ++c) {
        const auto o = static_cast<Eigen::Index>(k.start[c]);
        const auto q = static_cast<Eigen::Index>(k.dim[c]);
        m = std::min(m, u[o] - u.segment(o + 1, q - 1).norm());
    }
    return m;
}

void add_identity(const Cones& k, Vec& u, double alpha) {
    for (std::size_t i = 0; i < k.lp; ++i) {
        u[static_cast<Eigen::Index>(i)] += alpha;
    }
    for (std::size_t c = 0; c < k.dim.size(); ++c) {
        u[static_cast<Eigen::Index>(k.start[c])] += alpha;
    }
}

/// Largest alpha with u + alpha d in the cone (inf if unbounded).
double max_step(const Cones& k, const Vec& u, const Vec& d) {
    double alpha = kInf;
    for (std::size_t i = 0; i < k.lp; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (d[ii] < 0.0) {
            alpha = std::min(alpha, -u[ii] / d[ii]);
        }
    }
    for (std::size_t c = 0; c < k.dim.size(); ++c) {
        const auto o = static_cast<Eigen::Index>(k.start[c]);
        const auto q = static_cast<Eigen::Index>(k.dim[c]);
        const double u0 = u[o];
        const double d0 = d[o];
        const auto u1 = u.segment(o + 1, q - 1);
        const auto d1 = d.segment(o + 1, q - 1);
        const double a = d0 * d0 - d1.squaredNorm();
        const double b = u0 * d0 - u1.dot(d1);
        const double cc = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
        // f(alpha) = a alpha^2 + 2 b alpha + cc, f(0) = cc > 0.
        double root = kInf;
        if (a == 0.0) {
            if (b < 0.0) {
                root = -cc / (2.0 * b);
            }
        } else {
            const double disc = b * b - a * cc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double qq = -(b + (b >= 0.0 ? sq : -sq));
                for (double r : {qq / a, qq != 0.0 ? cc / qq : kInf}) {
                    if (r > 0.0) {
                        root = std::min(root, r);
                    }
                }
            }
        }
        if (d0 < 0.0) {
            root = std::min(root, -u0 / d0);
        }
        alpha = std::min(alpha, root);
    }
    return alpha;
}

/// Nesterov-Todd scaling point: W z = W^{-1} s = lambda.
struct Scaling {
    Vec lp_w;                           ///< sqrt(s / z)
    std::vector<Eigen::MatrixXd> w;     ///< per second-order cone
    std::vector<Eigen::MatrixXd> w2;    ///< W^2
    Vec lambda;

    bool update(const Cones& k, const Vec& s, const Vec& z) {
        lambda.resize(static_cast<Eigen::Index>(k.total));
        lp_w.resize(static_cast<Eigen::Index>(k.lp));
        for (std::size_t i = 0; i < k.lp; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            if (!(s[ii] > 0.0 && z[ii] > 0.0)) {
                return false;
            }
            lp_w[ii] = std::sqrt(s[ii] / z[ii]);
            lambda[ii] = std::sqrt(s[ii] * z[ii]);
        }
        w.resize(k.dim.size());
        w2.resize(k.dim.size());
        for (std::size_t c = 0; c < k.dim.size(); ++c) {
            const auto o = static_cast<Eigen::Index>(k.start[c]);
            const auto q = static_cast<Eigen::Index>(k.dim[c]);
            const double ds = soc_det(s, k.start[c], k.dim[c]);
            const double dz = soc_det(z, k.start[c], k.dim[c]);
            if (!(ds > 0.0 && dz > 0.0 && s[o] > 0.0 && z[o] > 0.0)) {
                return false;
            }
            const Vec sb = s.segment(o, q) / std::sqrt(ds);
            const Vec zb = z.segment(o, q) / std::sqrt(dz);
            const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 0.0));
            Vec wb(q);
            wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            wb.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
            const double eta = std::pow(ds / dz, 0.25);
            Eigen::MatrixXd W(q, q);
            W(0, 0) = wb[0];
            W.block(0, 1, 1, q - 1) = wb.tail(q - 1).transpose();
            W.block(1, 0, q - 1, 1) = wb.tail(q - 1);
            W.block(1, 1, q - 1, q - 1) =
                Eigen::MatrixXd::Identity(q - 1, q - 1) +
                wb.tail(q - 1) * wb.tail(q - 1).transpose() / (1.0 + wb[0]);
            W *= eta;
            w[c] = W;
            w2[c] = W * W;
            lambda.segment(o, q) = W * z.segment(o, q);
        }
        return true;
    }

    /// out = W v
    Vec apply_w(const Cones& k, const Vec& v) const {
        Vec out(v.size());
        for (std::size_t i = 0; i < k.lp; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            out[ii] = lp_w[ii] * v[ii];
        }
        for (std::size_t c = 0; c < k.dim.size(); ++c) {
            const auto o = static_cast<Eigen::Index>(k.start[c]);
            const auto q = static_cast<Eigen::Index>(k.dim[c]);
            out.segment(o, q) = w[c] * v.segment(o, q);
        }
        return out;
    }

    /// out = W^{-1} v
    Vec apply_winv(const Cones& k, const Vec& v) const {
        Vec out(v.size());
        for (std::size_t i = 0; i < k.lp; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            out[ii] = v[ii] / lp_w[ii];
        }
        for (std::size_t c = 0; c < k.dim.size(); ++c) {
            const auto o = static_cast<Eigen::Index>(k.start[c]);
            const auto q = static_cast<Eigen::Index>(k.dim[c]);
            out.segment(o, q) = w[c].ldlt().solve(v.segment(o, q));
        }
        return out;
    }
};

/// Jordan product u o v.
Vec jordan_product(const Cones& k, const Vec& u, const Vec& v) {
    Vec out(u.size());
    for (std::size_t i = 0; i < k.lp; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out[ii] = u[ii] * v[ii];
    }
    for (std::size_t c = 0; c < k.dim.size(); ++c) {
        const auto o = static_cast<Eigen::Index>(k.start[c]);
        const auto q = static_cast<Eigen::Index>(k.dim[c]);
        out[o] = u.segment(o, q).dot(v.segment(o, q));
        out.segment(o + 1, q - 1) = u[o] * v.segment(o + 1, q - 1) + v[o] * u.segment(o + 1, q - 1);
    }
    return out;
}

/// Solves lambda o x = r.
Vec jordan_divide(const Cones& k, const Vec& lambda, const Vec& r) {
    Vec out(r.size());
    for (std::size_t i = 0; i < k.lp; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out[ii] = r[ii] / lambda[ii];
    }
    for (std::size_t c = 0; c < k.dim.size(); ++c) {
        const auto o = static_cast<Eigen::Index>(k.start[c]);
        const auto q = static_cast<Eigen::Index>(k.dim[c]);
        const double l0 = lambda[o];
        const auto l1 = lambda.segment(o + 1, q - 1);
        const double det = l0 * l0 - l1.squaredNorm();
        const double x0 = (l0 * r[o] - l1.dot(r.segment(o + 1, q - 1))) / det;
        out[o] = x0;
        out.segment(o + 1, q - 1) = (r.segment(o + 1, q - 1) - x0 * l1) / l0;
    }
    return out;
}

Vec identity_vector(const Cones& k) {
    Vec e = Vec::Zero(static_cast<Eigen::Index>(k.total));
    add_identity(k, e, 1.0);
    return e;
}

/// Ruiz equilibration with uniform scaling inside each cone block.
struct Equilibration {
    Vec col;    ///< E
    Vec row_a;  ///< D_A
    Vec row_g;  ///< D_G
    double cost = 1.0;
};

Equilibration equilibrate(SpMat& A, SpMat& G, const Cones& k, int passes) {
    Equilibration eq;
    const Eigen::Index n = A.cols();
    eq.col = Vec::Ones(n);
    eq.row_a = Vec::Ones(A.rows());
    eq.row_g = Vec::Ones(G.rows());
    for (int pass = 0; pass < passes; ++pass) {
        Vec cn = Vec::Zero(n);
        Vec ra = Vec::Zero(A.rows());
        Vec rg = Vec::Zero(G.rows());
        for (Eigen::Index j = 0; j < n; ++j) {
            for (SpMat::InnerIterator it(A, j); it; ++it) {
                cn[j] = std::max(cn[j], std::abs(it.value()));
                ra[it.row()] = std::max(ra[it.row()], std::abs(it.value()));
            }
            for (SpMat::InnerIterator it(G, j); it; ++it) {
                cn[j] = std::max(cn[j], std::abs(it.value()));
                rg[it.row()] = std::max(rg[it.row()], std::abs(it.value()));
            }
        }
        for (std::size_t c = 0; c < k.dim.size(); ++c) {
            const auto o = static_cast<Eigen::Index>(k.start[c]);
            const auto q = static_cast<Eigen::Index>(k.dim[c]);
            rg.segment(o, q).setConstant(rg.segment(o, q).maxCoeff());
        }
        const auto factor = [](double v) {
            return v > 0.0 ? std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4) : 1.0;
        };
        Vec fc(n);
        Vec fa(A.rows());
        Vec fg(G.rows());
        double change = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            fc[j] = factor(cn[j]);
            change = std::max(change, std::abs(1.0 - cn[j]));
        }
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            fa[i] = factor(ra[i]);
            change = std::max(change, std::abs(1.0 - ra[i]));
        }
        for (Eigen::Index i = 0; i < G.rows(); ++i) {
            fg[i] = factor(rg[i]);
            change = std::max(change, std::abs(1.0 - rg[i]));
        }
        A = fa.asDiagonal() * A * fc.asDiagonal();
        G = fg.asDiagonal() * G * fc.asDiagonal();
        eq.col.array() *= fc.array();
        eq.row_a.array() *= fa.array();
        eq.row_g.array() *= fg.array();
        if (change < 1e-3) {
            break;
        }
    }
    return eq;
}

class KktSystem {
public:
    KktSystem(const SpMat& A, const SpMat& G, const Cones& k, double reg)
        : n_(A.cols()), p_(A.rows()), m_(G.rows()), reg_(reg), cones_(k) {
        const Eigen::Index dim = n_ + p_ + m_;
        std::vector<Triplet> trip;
        for (Eigen::Index j = 0; j < n_; ++j) {
            for (SpMat::InnerIterator it(A, j); it; ++it) {
                trip.emplace_back(n_ + it.row(), j, it.value());
                trip.emplace_back(j, n_ + it.row(), it.value());
            }
            for (SpMat::InnerIterator it(G, j); it; ++it) {
                trip.emplace_back(n_ + p_ + it.row(), j, it.value());
                trip.emplace_back(j, n_ + p_ + it.row(), it.value());
            }
        }
        sign_ = Vec::Zero(dim);
        for (Eigen::Index i = 0; i < n_; ++i) {
            trip.emplace_back(i, i, 0.0);
            sign_[i] = 1.0;
        }
        for (Eigen::Index i = n_; i < dim; ++i) {
            sign_[i] = -1.0;
        }
        for (Eigen::Index i = 0; i < p_; ++i) {
            trip.emplace_back(n_ + i, n_ + i, 0.0);
        }
        for (std::size_t i = 0; i < k.lp; ++i) {
            const auto ii = n_ + p_ + static_cast<Eigen::Index>(i);
            trip.emplace_back(ii, ii, 0.0);
        }
        for (std::size_t c = 0; c < k.dim.size(); ++c) {
            const auto o = n_ + p_ + static_cast<Eigen::Index>(k.start[c]);
            const auto q = static_cast<Eigen::Index>(k.dim[c]);
            for (Eigen::Index r = 0; r < q; ++r) {
                for (Eigen::Index s = 0; s < q; ++s) {
                    trip.emplace_back(o + r, o + s, 0.0);
                }
            }
        }
        K_.resize(dim, dim);
        K_.setFromTriplets(trip.begin(), trip.end());
        K_.makeCompressed();
        ldlt_.analyzePattern(K_);
    }

    /// Loads -W^2 into the cone block and factors the regularized matrix.
    bool factor(const Scaling& w) {
        for (Eigen::Index i = 0; i < n_; ++i) {
            K_.coeffRef(i, i) = reg_;
        }
        for (Eigen::Index i = 0; i < p_; ++i) {
            K_.coeffRef(n_ + i, n_ + i) = -reg_;
        }
        for (std::size_t i = 0; i < cones_.lp; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            K_.coeffRef(n_ + p_ + ii, n_ + p_ + ii) = -w.lp_w[ii] * w.lp_w[ii] - reg_;
        }
        for (std::size_t c = 0; c < cones_.dim.size(); ++c) {
            const auto o = n_ + p_ + static_cast<Eigen::Index>(cones_.start[c]);
            const auto q = static_cast<Eigen::Index>(cones_.dim[c]);
            for (Eigen::Index r = 0; r < q; ++r) {
                for (Eigen::Index s = 0; s < q; ++s) {
                    K_.coeffRef(o + r, o + s) = -w.w2[c](r, s) - (r == s ? reg_ : 0.0);
                }
            }
        }
        ldlt_.factorize(K_);
        return ldlt_.info() == Eigen::Success;
    }

    /// Solves the unregularized system by iterative refinement on the regularized factor.
    Vec solve(const Vec& rhs, int refine = 10) const {
        Vec u = ldlt_.solve(rhs);
        const double target = 1e-14 * (1.0 + inf_norm(rhs));
        for (int it = 0; it < refine; ++it) {
            const Vec res = rhs - multiply_exact(u);
            if (inf_norm(res) <= target) {
                break;
            }
            u += ldlt_.solve(res);
        }
        return u;
    }

private:
    Vec multiply_exact(const Vec& u) const {
        Vec out = K_.selfadjointView<Eigen::Lower>() * u;
        out -= reg_ * sign_.cwiseProduct(u);
        return out;
    }

    Eigen::Index n_, p_, m_;
    double reg_;
    const Cones& cones_;
    SpMat K_;
    Vec sign_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

double certified_lower_bound(const ConicProgram& program, const StandardForm& form,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
    // Project z onto the cone so that z's >= 0 holds for every feasible slack.
    Vec zp = z;
    for (std::size_t i = 0; i < form.lp; ++i) {
        zp[static_cast<Eigen::Index>(i)] = std::max(0.0, zp[static_cast<Eigen::Index>(i)]);
    }
    auto start = static_cast<Eigen::Index>(form.lp);
    for (std::size_t q : form.soc_dims) {
        const auto qq = static_cast<Eigen::Index>(q);
        const double t = zp[start];
        const double w = zp.segment(start + 1, qq - 1).norm();
        if (w <= -t) {
            zp.segment(start, qq).setZero();
        } else if (w > t) {
            const double a = 0.5 * (t + w);
            zp.segment(start + 1, qq - 1) *= a / w;
            zp[start] = a;
        }
        start += qq;
    }
    const Vec r = form.c + form.A.transpose() * y + form.G.transpose() * zp;
    double bound = -form.b.dot(y) - form.h.dot(zp) + form.offset;
    const bool implied = program.implied_lb.size() == program.num_variables() &&
                         program.implied_ub.size() == program.num_variables();
    for (std::size_t j = 0; j < program.num_variables(); ++j) {
        const double rj = r[static_cast<Eigen::Index>(j)];
        if (rj == 0.0) {
            continue;
        }
        const double lo = implied ? std::max(program.lb[j], program.implied_lb[j]) : program.lb[j];
        const double hi = implied ? std::min(program.ub[j], program.implied_ub[j]) : program.ub[j];
        const double side = rj > 0.0 ? lo : hi;
        if (!std::isfinite(side)) {
            return -kInf;
        }
        bound += rj * side;
    }
    return bound;
}

ConicSolution solve_conic(const ConicProgram& program, const ConicOptions& options) {
    const StandardForm form = to_standard_form(program);
    ConicSolution sol = solve_standard_form(form, options);
    if (sol.ok()) {
        sol.certified_bound = certified_lower_bound(program, form, sol.y, sol.z);
    }
    return sol;
}

ConicSolution solve_standard_form(const StandardForm& form, const ConicOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    ConicSolution sol;
    Cones k;
    k.lp = form.lp;
    std::size_t offset = form.lp;
    for (std::size_t q : form.soc_dims) {
        k.start.push_back(offset);
        k.dim.push_back(q);
        offset += q;
    }
    k.total = offset;
    if (static_cast<std::size_t>(form.G.rows()) != k.total) {
        throw std::invalid_argument("cone dimensions do not match the G rows");
    }
    const Eigen::Index n = form.A.cols();
    const Eigen::Index p = form.A.rows();
    const Eigen::Index m = form.G.rows();

    SpMat A = form.A;
    SpMat G = form.G;
    Equilibration eq = equilibrate(A, G, k, options.equilibration_passes);
    const Vec b = eq.row_a.cwiseProduct(form.b);
    const Vec h = eq.row_g.cwiseProduct(form.h);
    Vec c = eq.col.cwiseProduct(form.c);
    eq.cost = 1.0 / std::max(1.0, inf_norm(c));
    c *= eq.cost;

    const auto finish = [&](ConicStatus status, const Vec& x, const Vec& y, const Vec& z,
                            double tau, std::string message) {
        const Vec xo = eq.col.cwiseProduct(x) / tau;
        sol.status = status;
        sol.x.assign(xo.data(), xo.data() + xo.size());
        sol.y = eq.row_a.cwiseProduct(y) / (eq.cost * tau);
        sol.z = eq.row_g.cwiseProduct(z) / (eq.cost * tau);
        sol.objective = form.c.dot(xo) + form.offset;
        sol.dual_objective = -form.b.dot(sol.y) - form.h.dot(sol.z) + form.offset;
        sol.message = std::move(message);
        sol.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return sol;
    };

    KktSystem kkt(A, G, k, 1e-8);
    Scaling scaling;
    scaling.lp_w = Vec::Ones(static_cast<Eigen::Index>(k.lp));
    for (std::size_t q : k.dim) {
        const auto qq = static_cast<Eigen::Index>(q);
        scaling.w.push_back(Eigen::MatrixXd::Identity(qq, qq));
        scaling.w2.push_back(Eigen::MatrixXd::Identity(qq, qq));
    }
    if (!kkt.factor(scaling)) {
        return finish(ConicStatus::numerical_limit, Vec::Zero(n), Vec::Zero(p), Vec::Zero(m), 1.0,
                      "initial factorization failed");
    }
    Vec rhs(n + p + m);
    rhs << Vec::Zero(n), b, h;
    Vec sol0 = kkt.solve(rhs);
    Vec x = sol0.head(n);
    Vec s = -sol0.tail(m);
    rhs << -c, Vec::Zero(p), Vec::Zero(m);
    Vec sol1 = kkt.solve(rhs);
    Vec y = sol1.segment(n, p);
    Vec z = sol1.tail(m);
    {
        const double ap = -cone_margin(k, s);
        if (ap >= -1e-8 * std::max(1.0, inf_norm(s))) {
            add_identity(k, s, 1.0 + std::max(ap, 0.0));
        }
        const double ad = -cone_margin(k, z);
        if (ad >= -1e-8 * std::max(1.0, inf_norm(z))) {
            add_identity(k, z, 1.0 + std::max(ad, 0.0));
        }
    }
    double tau = 1.0;
    double kappa = 1.0;
    const double degree = static_cast<double>(k.degree()) + 1.0;
    const Vec e = identity_vector(k);

    const double bnorm = 1.0 + inf_norm(form.b);
    const double hnorm = 1.0 + inf_norm(form.h);
    const double cnorm = 1.0 + inf_norm(form.c);

    Vec best_x = x;
    Vec best_y = y;
    Vec best_z = z;
    double best_tau = tau;
    double best_merit = kInf;

    for (int iter = 0; iter <= options.max_iter; ++iter) {
        sol.iterations = iter;
        // Residuals of the scaled embedding.
        const Vec rx = A.transpose() * y + G.transpose() * z + c * tau;
        const Vec ry = -(A * x) + b * tau;
        const Vec rz = -(G * x) + h * tau - s;
        const double cx = c.dot(x);
        const double byhz = b.dot(y) + h.dot(z);
        const double rt = -cx - byhz - kappa;

        // Convergence measured on the unscaled problem.
        const Vec xo = eq.col.cwiseProduct(x) / tau;
        const Vec yo = eq.row_a.cwiseProduct(y) / (eq.cost * tau);
        const Vec zo = eq.row_g.cwiseProduct(z) / (eq.cost * tau);
        const Vec so = s.cwiseQuotient(eq.row_g) / tau;
        const double pres =
            std::max(inf_norm(form.A * xo - form.b) / bnorm,
                     inf_norm(form.G * xo + so - form.h) / hnorm);
        const double dres =
            inf_norm(form.A.transpose() * yo + form.G.transpose() * zo + form.c) / cnorm;
        const double pcost = form.c.dot(xo);
        const double dcost = -form.b.dot(yo) - form.h.dot(zo);
        const double gap = so.dot(zo);
        const double relgap = std::abs(pcost - dcost) /
                              std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
        sol.primal_residual = pres;
        sol.dual_residual = dres;
        sol.gap = gap;
        if (options.verbose) {
            std::fprintf(stderr, "%3d pcost %.10e dcost %.10e pres %.2e dres %.2e gap %.2e k/t %.2e\n",
                         iter, pcost, dcost, pres, dres, gap, kappa / tau);
        }
        const double merit = std::max({pres, dres, relgap});
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
            best_y = y;
            best_z = z;
            best_tau = tau;
        }
        if (pres < options.tol_feas && dres < options.tol_feas &&
            (std::abs(pcost - dcost) < options.tol_abs || relgap < options.tol_rel)) {
            return finish(ConicStatus::optimal, x, y, z, tau, "converged");
        }
        // Infeasibility certificates on the homogeneous variables.
        if (byhz < 0.0) {
            const Vec yc = eq.row_a.cwiseProduct(y);
            const Vec zc = eq.row_g.cwiseProduct(z);
            const double denom = -(form.b.dot(yc) + form.h.dot(zc));
            if (denom > 0.0) {
                const double pinf =
                    inf_norm(form.A.transpose() * yc + form.G.transpose() * zc) / denom;
                if (pinf < options.tol_feas && kappa > tau) {
                    sol.y = yc / denom;
                    sol.z = zc / denom;
                    sol.status = ConicStatus::infeasible;
                    sol.message = "primal infeasible";
                    sol.objective = kInf;
                    sol.dual_objective = kInf;
                    sol.seconds = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - started)
                                      .count();
                    return sol;
                }
            }
        }
        if (cx < 0.0) {
            const Vec xc = eq.col.cwiseProduct(x);
            const Vec sc = s.cwiseQuotient(eq.row_g);
            const double denom = -form.c.dot(xc);
            if (denom > 0.0) {
                const double dinf = std::max(inf_norm(form.A * xc), inf_norm(form.G * xc + sc)) /
                                    denom;
                if (dinf < options.tol_feas && kappa > tau) {
                    sol.x.assign(xc.data(), xc.data() + xc.size());
                    sol.status = ConicStatus::unbounded;
                    sol.message = "dual infeasible";
                    sol.objective = -kInf;
                    sol.dual_objective = -kInf;
                    sol.seconds = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - started)
                                      .count();
                    return sol;
                }
            }
        }
        if (iter == options.max_iter) {
            break;
        }

        if (!scaling.update(k, s, z) || !kkt.factor(scaling)) {
            return finish(ConicStatus::numerical_limit, best_x, best_y, best_z, best_tau,
                          "lost interiority or factorization failed");
        }
        const Vec& lambda = scaling.lambda;
        const double mu = (s.dot(z) + tau * kappa) / degree;

        // Direction for the dtau column.
        rhs << -c, b, h;
        const Vec d1 = kkt.solve(rhs);
        const Vec x1 = d1.head(n);
        const Vec y1 = d1.segment(n, p);
        const Vec z1 = d1.tail(m);
        const double denom_base = -c.dot(x1) - b.dot(y1) - h.dot(z1);

        struct Step {
            Vec dx, dy, dz, ds;
            double dtau = 0.0, dkappa = 0.0;
        };
        const auto direction = [&](double scale, const Vec& r5, double r6) {
            // r1..r4 = -scale * residuals, r5 the complementarity target in lambda space.
            const Vec wr5 = scaling.apply_w(k, jordan_divide(k, lambda, r5));
            Vec r(n + p + m);
            r << -scale * rx, scale * ry, scale * rz - wr5;
            const Vec d2 = kkt.solve(r);
            const Vec x2 = d2.head(n);
            const Vec y2 = d2.segment(n, p);
            const Vec z2 = d2.tail(m);
            const double r4 = -scale * rt;
            Step st;
            st.dtau = (r4 + r6 / tau + c.dot(x2) + b.dot(y2) + h.dot(z2)) /
                      (kappa / tau + denom_base);
            st.dx = x2 + st.dtau * x1;
            st.dy = y2 + st.dtau * y1;
            st.dz = z2 + st.dtau * z1;
            // ds = W (lambda \ r5) - W^2 dz
            st.ds = wr5 - scaling.apply_w(k, scaling.apply_w(k, st.dz));
            st.dkappa = (r6 - kappa * st.dtau) / tau;
            return st;
        };
        const auto step_length = [&](const Step& st) {
            double a = std::min(max_step(k, s, st.ds), max_step(k, z, st.dz));
            if (st.dtau < 0.0) {
                a = std::min(a, -tau / st.dtau);
            }
            if (st.dkappa < 0.0) {
                a = std::min(a, -kappa / st.dkappa);
            }
            return a;
        };

        const Vec ll = jordan_product(k, lambda, lambda);
        const Step aff = direction(1.0, -ll, -tau * kappa);
        const double alpha_aff = std::min(1.0, step_length(aff));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3.0), 1e-8, 1.0);
        const Vec corr = jordan_product(k, scaling.apply_winv(k, aff.ds), scaling.apply_w(k, aff.dz));
        const Vec r5 = -ll - corr + sigma * mu * e;
        const double r6 = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        const Step st = direction(1.0 - sigma, r5, r6);
        const double alpha = std::min(1.0, 0.99 * step_length(st));
        if (!(alpha > 0.0) || !std::isfinite(alpha)) {
            return finish(ConicStatus::numerical_limit, best_x, best_y, best_z, best_tau,
                          "zero step length");
        }
        x += alpha * st.dx;
        y += alpha * st.dy;
        z += alpha * st.dz;
        s += alpha * st.ds;
        tau += alpha * st.dtau;
        kappa += alpha * st.dkappa;
    }
    return finish(ConicStatus::numerical_limit, best_x, best_y, best_z, best_tau,
                  "iteration limit");
}

}  // namespace evmopf
