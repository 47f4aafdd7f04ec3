#include <doctest.h>

#include <cmath>
#include <random>

#include "evmopf/acopf_period.hpp"
#include "evmopf/nlp_solver.hpp"
#include "test_support.hpp"

using namespace evmopf;

namespace {

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& m) { return Eigen::MatrixXd(m); }

/// Gradient of the Lagrangian assembled from the first-order callbacks.
Eigen::VectorXd lagrangian_gradient(const NonlinearProgram& p, const Eigen::VectorXd& x, double sigma,
                                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
    Eigen::VectorXd grad(x.size());
    p.objective(x, &grad);
    Eigen::VectorXd g, h;
    Eigen::SparseMatrix<double> jg, jh;
    p.constraints(x, g, h, &jg, &jh);
    return sigma * grad + dense(jg).transpose() * lambda + dense(jh).transpose() * mu;
}

AcopfPeriod random_period(const MopfInstance& inst, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    Eigen::VectorXd pd = inst.loads.p.col(0);
    Eigen::VectorXd qd = inst.loads.q.col(0);
    Eigen::VectorXd ev = Eigen::VectorXd::NullaryExpr(pd.size(), [&] { return u(rng); });
    return AcopfPeriod(inst.network, pd, qd, ev);
}

Eigen::VectorXd random_point(const AcopfPeriod& p, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& net = p.network();
    Eigen::VectorXd x(p.num_variables());
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        x[p.va(i)] = 0.6 * (u(rng) - 0.5);
        x[p.vm(i)] = 0.9 + 0.2 * u(rng);
    }
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        x[p.pg(g)] = 2.0 * u(rng);
        x[p.qg(g)] = u(rng) - 0.5;
    }
    return x;
}

/// min w (x + y) + v (x^2 + y^2)  s.t.  x y = c  (or x - y = c when linear_eq),
/// x^2 + y^2 <= 1,  0 <= x, y <= 10.
class Disk : public NonlinearProgram {
public:
    Disk(double w, double v, double c, bool linear_eq) : w_(w), v_(v), c_(c), linear_(linear_eq) {}
    std::size_t num_variables() const override { return 2; }
    std::size_t num_equalities() const override { return 1; }
    std::size_t num_inequalities() const override { return 1; }
    void bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const override {
        lo = Eigen::VectorXd::Zero(2);
        hi = Eigen::VectorXd::Constant(2, 10.0);
    }
    double objective(const Eigen::VectorXd& x, Eigen::VectorXd* gradient) const override {
        if (gradient) {
            *gradient = Eigen::VectorXd::Constant(2, w_) + 2.0 * v_ * x;
        }
        return w_ * (x[0] + x[1]) + v_ * x.squaredNorm();
    }
    void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::VectorXd& h,
                     Eigen::SparseMatrix<double>* jac_g,
                     Eigen::SparseMatrix<double>* jac_h) const override {
        g.resize(1);
        h.resize(1);
        g[0] = linear_ ? x[0] - x[1] - c_ : x[0] * x[1] - c_;
        h[0] = x.squaredNorm() - 1.0;
        if (jac_g) {
            jac_g->resize(1, 2);
            jac_g->setZero();
            jac_g->insert(0, 0) = linear_ ? 1.0 : x[1];
            jac_g->insert(0, 1) = linear_ ? -1.0 : x[0];
        }
        if (jac_h) {
            jac_h->resize(1, 2);
            jac_h->setZero();
            jac_h->insert(0, 0) = 2.0 * x[0];
            jac_h->insert(0, 1) = 2.0 * x[1];
        }
    }
    Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd&, double sigma,
                                        const Eigen::VectorXd& lambda,
                                        const Eigen::VectorXd& mu) const override {
        const double diag = 2.0 * sigma * v_ + 2.0 * mu[0];
        const double off = linear_ ? 0.0 : lambda[0];
        Eigen::MatrixXd h(2, 2);
        h << diag, off, off, diag;
        return h.sparseView();
    }

private:
    double w_, v_, c_;
    bool linear_;
};

}  // namespace

TEST_CASE("AC period derivatives agree with finite differences") {
    std::mt19937 rng(3);
    for (const char* file : {"case2_radial.m", "case3_triangle.m", "case5_meshed.m"}) {
        const Network net = parse_case_file(test::fixture(file));
        const auto inst = test::single_period(net);
        const auto p = random_period(inst, rng);
        for (int trial = 0; trial < 3; ++trial) {
            const Eigen::VectorXd x = random_point(p, rng);
            const auto n = static_cast<Eigen::Index>(p.num_variables());
            Eigen::VectorXd grad(n);
            p.objective(x, &grad);
            Eigen::VectorXd g, h;
            Eigen::SparseMatrix<double> jg, jh;
            p.constraints(x, g, h, &jg, &jh);
            CHECK(g.size() == static_cast<Eigen::Index>(p.num_equalities()));
            CHECK(h.size() == static_cast<Eigen::Index>(p.num_inequalities()));
            std::normal_distribution<double> nd;
            const Eigen::VectorXd lambda = Eigen::VectorXd::NullaryExpr(g.size(), [&] { return nd(rng); });
            const Eigen::VectorXd mu = Eigen::VectorXd::NullaryExpr(h.size(), [&] { return std::abs(nd(rng)); });
            const Eigen::MatrixXd hess = dense(p.hessian(x, 0.7, lambda, mu));
            CHECK((hess - hess.transpose()).cwiseAbs().maxCoeff() <= 1e-12);

            const double step = 1e-6;
            for (Eigen::Index j = 0; j < n; ++j) {
                Eigen::VectorXd xp = x, xm = x;
                xp[j] += step;
                xm[j] -= step;
                const double fd = (p.objective(xp, nullptr) - p.objective(xm, nullptr)) / (2 * step);
                CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
                Eigen::VectorXd gp, hp, gm, hm;
                p.constraints(xp, gp, hp, nullptr, nullptr);
                p.constraints(xm, gm, hm, nullptr, nullptr);
                const Eigen::VectorXd dg = (gp - gm) / (2 * step);
                const Eigen::VectorXd dh = (hp - hm) / (2 * step);
                CHECK((dense(jg).col(j) - dg).cwiseAbs().maxCoeff() <=
                      1e-6 * std::max(1.0, dg.cwiseAbs().maxCoeff()));
                if (h.size() > 0) {
                    CHECK((dense(jh).col(j) - dh).cwiseAbs().maxCoeff() <=
                          1e-6 * std::max(1.0, dh.cwiseAbs().maxCoeff()));
                }
                const Eigen::VectorXd lp = lagrangian_gradient(p, xp, 0.7, lambda, mu);
                const Eigen::VectorXd lm = lagrangian_gradient(p, xm, 0.7, lambda, mu);
                const Eigen::VectorXd dl = (lp - lm) / (2 * step);
                const double scale = std::max(1.0, dl.cwiseAbs().maxCoeff());
                CHECK((hess.col(j) - dl).cwiseAbs().maxCoeff() <= 1e-5 * scale);
            }
        }
    }
}

TEST_CASE("interior-point method on small problems with known solutions") {
    // Maximize x + y on the unit disk along x - y = c: active circle, x + y = sqrt(2 - c^2).
    for (double c : {0.0, 0.2, 0.6}) {
        const auto r = solve_nlp(Disk(-1.0, 0.0, c, true), Eigen::Vector2d(0.3, 0.1));
        REQUIRE(r.ok());
        const double s = std::sqrt(2.0 - c * c);
        CHECK(r.x[0] + r.x[1] == doctest::Approx(s).epsilon(1e-7));
        CHECK(r.x[0] - r.x[1] == doctest::Approx(c).epsilon(1e-7));
        CHECK(r.objective == doctest::Approx(-s).epsilon(1e-7));
        CHECK(r.mu[0] > 0.0);
    }
    // Closest point to the origin on x y = c: x = y = sqrt(c), inside the disk.
    for (double c : {0.1, 0.3}) {
        const auto r = solve_nlp(Disk(0.0, 1.0, c, false), Eigen::Vector2d(0.9, 0.2));
        REQUIRE(r.ok());
        CHECK(r.x[0] == doctest::Approx(std::sqrt(c)).epsilon(1e-7));
        CHECK(r.x[1] == doctest::Approx(std::sqrt(c)).epsilon(1e-7));
        CHECK(r.objective == doctest::Approx(2.0 * c).epsilon(1e-7));
        CHECK(r.lambda[0] == doctest::Approx(-2.0).epsilon(1e-6));
    }
    CHECK(to_string(NlpStatus::converged) != to_string(NlpStatus::iteration_limit));
}

TEST_CASE("interior-point method reports an infeasible problem") {
    NlpOptions opts;
    opts.max_iter = 60;
    const auto r = solve_nlp(Disk(0.0, 1.0, 0.9, false), Eigen::Vector2d(0.3, 0.4), opts);  // x y <= 1/2
    CHECK_FALSE(r.ok());
}
