#include "evmopf/nlp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include <Eigen/SparseLU>

namespace evmopf {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

/// The problem with bounds folded into the constraint sets.
class Augmented {
public:
    explicit Augmented(const NonlinearProgram& p) : p_(p) {
        const auto n = static_cast<Eigen::Index>(p.num_variables());
        lo_.resize(n);
        hi_.resize(n);
        p.bounds(lo_, hi_);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (lo_[j] == hi_[j]) {
                fixed_.push_back(j);
                continue;
            }
            if (std::isfinite(hi_[j])) {
                upper_.push_back(j);
            }
            if (std::isfinite(lo_[j])) {
                lower_.push_back(j);
            }
        }
        neq_ = static_cast<Eigen::Index>(p.num_equalities());
        niq_ = static_cast<Eigen::Index>(p.num_inequalities());
    }

    Eigen::Index n() const { return lo_.size(); }
    Eigen::Index total_eq() const { return neq_ + static_cast<Eigen::Index>(fixed_.size()); }
    Eigen::Index total_iq() const {
        return niq_ + static_cast<Eigen::Index>(upper_.size() + lower_.size());
    }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }

    void evaluate(const Vec& x, Vec& g, Vec& h, SpMat* dg, SpMat* dh) const {
        Vec gn(neq_);
        Vec hn(niq_);
        SpMat jg;
        SpMat jh;
        p_.constraints(x, gn, hn, dg ? &jg : nullptr, dh ? &jh : nullptr);
        g.resize(total_eq());
        h.resize(total_iq());
        g.head(neq_) = gn;
        for (std::size_t k = 0; k < fixed_.size(); ++k) {
            g[neq_ + static_cast<Eigen::Index>(k)] = x[fixed_[k]] - lo_[fixed_[k]];
        }
        h.head(niq_) = hn;
        Eigen::Index r = niq_;
        for (auto j : upper_) {
            h[r++] = x[j] - hi_[j];
        }
        for (auto j : lower_) {
            h[r++] = lo_[j] - x[j];
        }
        if (dg) {
            std::vector<Triplet> t;
            append(jg, 0, t);
            for (std::size_t k = 0; k < fixed_.size(); ++k) {
                t.emplace_back(neq_ + static_cast<Eigen::Index>(k), fixed_[k], 1.0);
            }
            dg->resize(total_eq(), n());
            dg->setFromTriplets(t.begin(), t.end());
        }
        if (dh) {
            std::vector<Triplet> t;
            append(jh, 0, t);
            Eigen::Index row = niq_;
            for (auto j : upper_) {
                t.emplace_back(row++, j, 1.0);
            }
            for (auto j : lower_) {
                t.emplace_back(row++, j, -1.0);
            }
            dh->resize(total_iq(), n());
            dh->setFromTriplets(t.begin(), t.end());
        }
    }

    SpMat hessian(const Vec& x, double factor, const Vec& lam, const Vec& mu) const {
        return p_.hessian(x, factor, lam.head(neq_), mu.head(niq_));
    }

    double objective(const Vec& x, Vec* grad) const { return p_.objective(x, grad); }

    Vec nonlinear_lambda(const Vec& lam) const { return lam.head(neq_); }
    Vec nonlinear_mu(const Vec& mu) const { return mu.head(niq_); }

private:
    static void append(const SpMat& m, Eigen::Index row0, std::vector<Triplet>& t) {
        for (Eigen::Index j = 0; j < m.outerSize(); ++j) {
            for (SpMat::InnerIterator it(m, j); it; ++it) {
                t.emplace_back(row0 + it.row(), it.col(), it.value());
            }
        }
    }

    const NonlinearProgram& p_;
    Vec lo_, hi_;
    std::vector<Eigen::Index> fixed_, upper_, lower_;
    Eigen::Index neq_ = 0;
    Eigen::Index niq_ = 0;
};

}  // namespace

std::string to_string(NlpStatus status) {
    switch (status) {
        case NlpStatus::converged:
            return "converged";
        case NlpStatus::iteration_limit:
            return "iteration-limit";
        case NlpStatus::restoration_failure:
            return "restoration-failure";
        case NlpStatus::residual_check_failed:
            return "residual-check-failed";
    }
    return "unknown";
}

NlpResult solve_nlp(const NonlinearProgram& problem, const Eigen::VectorXd& x0,
                    const NlpOptions& options) {
    const Augmented aug(problem);
    const Eigen::Index n = aug.n();
    const Eigen::Index neq = aug.total_eq();
    const Eigen::Index niq = aug.total_iq();
    NlpResult result;
    Vec x = x0;

    Vec df(n);
    double f = aug.objective(x, &df) * options.cost_scale;
    df *= options.cost_scale;
    Vec g;
    Vec h;
    SpMat dg;
    SpMat dh;
    aug.evaluate(x, g, h, &dg, &dh);

    double gamma = 1.0;
    Vec lam = Vec::Zero(neq);
    Vec z = Vec::Constant(niq, options.z0);
    Vec mu = z;
    for (Eigen::Index i = 0; i < niq; ++i) {
        if (h[i] < -options.z0) {
            z[i] = -h[i];
        }
        if (gamma / z[i] > options.z0) {
            mu[i] = gamma / z[i];
        }
    }
    const Vec e = Vec::Ones(niq);

    const auto finish = [&](NlpStatus status, std::string message) {
        result.status = status;
        result.x = x.cwiseMax(aug.lo()).cwiseMin(aug.hi());
        result.lambda = aug.nonlinear_lambda(lam);
        result.mu = aug.nonlinear_mu(mu);
        result.objective = problem.objective(result.x, nullptr);
        result.message = std::move(message);
        return result;
    };

    Vec lx = df;
    if (neq > 0) {
        lx += dg.transpose() * lam;
    }
    if (niq > 0) {
        lx += dh.transpose() * mu;
    }
    const auto conditions = [&](double f_prev) {
        const double maxh = niq > 0 ? h.maxCoeff() : 0.0;
        result.feas_cond = std::max(inf_norm(g), maxh) / (1.0 + std::max(inf_norm(x), inf_norm(z)));
        result.grad_cond = inf_norm(lx) / (1.0 + std::max(inf_norm(lam), inf_norm(mu)));
        result.comp_cond = (niq > 0 ? z.dot(mu) : 0.0) / (1.0 + inf_norm(x));
        const double cost_cond = std::abs(f - f_prev) / (1.0 + std::abs(f_prev));
        return result.feas_cond < options.feas_tol && result.grad_cond < options.grad_tol &&
               result.comp_cond < options.comp_tol && cost_cond < options.cost_tol;
    };
    if (!std::isfinite(f) || !g.allFinite() || !h.allFinite()) {
        return finish(NlpStatus::restoration_failure, "non-finite values at the start point");
    }

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_ready = false;
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        result.iterations = iter;
        const Vec zinv = z.cwiseInverse();
        const SpMat lxx = aug.hessian(x, options.cost_scale, lam, mu);
        SpMat m = lxx;
        Vec nvec = lx;
        if (niq > 0) {
            const Vec wdiag = mu.cwiseProduct(zinv);
            m += SpMat(dh.transpose() * wdiag.asDiagonal() * dh);
            nvec += dh.transpose() * zinv.cwiseProduct(mu.cwiseProduct(h) + gamma * e);
        }
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(m.nonZeros() + 2 * dg.nonZeros() + n + neq));
        for (Eigen::Index j = 0; j < m.outerSize(); ++j) {
            for (SpMat::InnerIterator it(m, j); it; ++it) {
                t.emplace_back(it.row(), it.col(), it.value());
            }
        }
        for (Eigen::Index j = 0; j < dg.outerSize(); ++j) {
            for (SpMat::InnerIterator it(dg, j); it; ++it) {
                t.emplace_back(n + it.row(), it.col(), it.value());
                t.emplace_back(it.col(), n + it.row(), it.value());
            }
        }
        // Explicit zeros keep the pattern stable between iterations.
        for (Eigen::Index i = 0; i < n + neq; ++i) {
            t.emplace_back(i, i, 0.0);
        }
        SpMat kkt(n + neq, n + neq);
        kkt.setFromTriplets(t.begin(), t.end());
        kkt.makeCompressed();
        Vec rhs(n + neq);
        rhs << -nvec, -g;
        if (!pattern_ready) {
            lu.analyzePattern(kkt);
            pattern_ready = true;
        }
        lu.factorize(kkt);
        if (lu.info() != Eigen::Success) {
            lu.analyzePattern(kkt);
            lu.factorize(kkt);
            if (lu.info() != Eigen::Success) {
                return finish(NlpStatus::restoration_failure, "singular Newton system");
            }
        }
        const Vec d = lu.solve(rhs);
        if (!d.allFinite()) {
            return finish(NlpStatus::restoration_failure, "non-finite Newton step");
        }
        const Vec dx = d.head(n);
        const Vec dlam = d.tail(neq);
        Vec dz;
        Vec dmu;
        double alpha_p = 1.0;
        double alpha_d = 1.0;
        if (niq > 0) {
            dz = -h - z - dh * dx;
            dmu = -mu + zinv.cwiseProduct(gamma * e - mu.cwiseProduct(dz));
            for (Eigen::Index i = 0; i < niq; ++i) {
                if (dz[i] < 0.0) {
                    alpha_p = std::min(alpha_p, options.xi * z[i] / -dz[i]);
                }
                if (dmu[i] < 0.0) {
                    alpha_d = std::min(alpha_d, options.xi * mu[i] / -dmu[i]);
                }
            }
        }
        x += alpha_p * dx;
        if (niq > 0) {
            z += alpha_p * dz;
            mu += alpha_d * dmu;
            gamma = options.sigma * z.dot(mu) / static_cast<double>(niq);
        }
        lam += alpha_d * dlam;

        const double f_prev = f;
        f = aug.objective(x, &df) * options.cost_scale;
        df *= options.cost_scale;
        aug.evaluate(x, g, h, &dg, &dh);
        if (!std::isfinite(f) || !g.allFinite() || !h.allFinite()) {
            return finish(NlpStatus::restoration_failure, "non-finite values during iteration");
        }
        lx = df;
        if (neq > 0) {
            lx += dg.transpose() * lam;
        }
        if (niq > 0) {
            lx += dh.transpose() * mu;
        }
        const bool done = conditions(f_prev);
        if (options.verbose) {
            std::fprintf(stderr, "%3d f %.10e feas %.2e grad %.2e comp %.2e ap %.3f ad %.3f\n",
                         iter, f / options.cost_scale, result.feas_cond, result.grad_cond,
                         result.comp_cond, alpha_p, alpha_d);
        }
        if (done) {
            return finish(NlpStatus::converged, "converged");
        }
        if (inf_norm(x) > 1e10 || (niq > 0 && inf_norm(mu) > 1e20)) {
            return finish(NlpStatus::restoration_failure, "iterates diverged");
        }
    }
    return finish(NlpStatus::iteration_limit, "iteration limit");
}

}  // namespace evmopf
