#include "evmopf/acopf_period.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace evmopf {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Value, gradient and Hessian of a function of (theta_i, theta_j, V_i, V_j).
struct Local {
    double v = 0.0;
    std::array<double, 4> g{};
    std::array<std::array<double, 4>, 4> h{};

    void add(double w, const Local& o) {
        v += w * o.v;
        for (int a = 0; a < 4; ++a) {
            g[a] += w * o.g[a];
            for (int b = 0; b < 4; ++b) {
                h[a][b] += w * o.h[a][b];
            }
        }
    }
};

enum { TI = 0, TJ = 1, VI = 2, VJ = 3 };

struct LineLocals {
    Local pij, qij, pji, qji;
};

LineLocals line_locals(const Line& line, double ti, double tj, double vi, double vj) {
    const double d = ti - tj;
    const double cd = std::cos(d);
    const double sd = std::sin(d);
    Local c;
    Local s;
    c.v = vi * vj * cd;
    s.v = -vi * vj * sd;
    c.g = {s.v, -s.v, vj * cd, vi * cd};
    s.g = {-c.v, c.v, -vj * sd, -vi * sd};
    c.h[TI][TI] = -c.v;
    c.h[TI][TJ] = c.h[TJ][TI] = c.v;
    c.h[TJ][TJ] = -c.v;
    c.h[TI][VI] = c.h[VI][TI] = -vj * sd;
    c.h[TI][VJ] = c.h[VJ][TI] = -vi * sd;
    c.h[TJ][VI] = c.h[VI][TJ] = vj * sd;
    c.h[TJ][VJ] = c.h[VJ][TJ] = vi * sd;
    c.h[VI][VJ] = c.h[VJ][VI] = cd;
    s.h[TI][TI] = -s.v;
    s.h[TI][TJ] = s.h[TJ][TI] = s.v;
    s.h[TJ][TJ] = -s.v;
    s.h[TI][VI] = s.h[VI][TI] = -vj * cd;
    s.h[TI][VJ] = s.h[VJ][TI] = -vi * cd;
    s.h[TJ][VI] = s.h[VI][TJ] = vj * cd;
    s.h[TJ][VJ] = s.h[VJ][TJ] = vi * cd;
    s.h[VI][VJ] = s.h[VJ][VI] = -sd;
    Local sqi;
    sqi.v = vi * vi;
    sqi.g[VI] = 2.0 * vi;
    sqi.h[VI][VI] = 2.0;
    Local sqj;
    sqj.v = vj * vj;
    sqj.g[VJ] = 2.0 * vj;
    sqj.h[VJ][VJ] = 2.0;

    const auto& y = line.y;
    LineLocals f;
    f.pij.add(y.g_ff, sqi);
    f.pij.add(-y.g_ij, c);
    f.pij.add(y.b_ij, s);
    f.qij.add(-y.b_ff, sqi);
    f.qij.add(y.b_ij, c);
    f.qij.add(y.g_ij, s);
    f.pji.add(y.g_tt, sqj);
    f.pji.add(-y.g_ji, c);
    f.pji.add(-y.b_ji, s);
    f.qji.add(-y.b_tt, sqj);
    f.qji.add(y.b_ji, c);
    f.qji.add(-y.g_ji, s);
    return f;
}

/// p^2 + q^2 as a local function.
Local squared_magnitude(const Local& p, const Local& q) {
    Local out;
    out.v = p.v * p.v + q.v * q.v;
    for (int a = 0; a < 4; ++a) {
        out.g[a] = 2.0 * (p.v * p.g[a] + q.v * q.g[a]);
        for (int b = 0; b < 4; ++b) {
            out.h[a][b] = 2.0 * (p.g[a] * p.g[b] + p.v * p.h[a][b] + q.g[a] * q.g[b] +
                                 q.v * q.h[a][b]);
        }
    }
    return out;
}

}  // namespace

AcopfPeriod::AcopfPeriod(const Network& network, Eigen::VectorXd pd, Eigen::VectorXd qd,
                         Eigen::VectorXd ev_injection)
    : network_(network),
      pd_(std::move(pd)),
      qd_(std::move(qd)),
      ev_(std::move(ev_injection)),
      nb_(network.buses.size()),
      ng_(network.generators.size()),
      nl_(network.lines.size()),
      ref_(network.reference_bus()),
      gens_at_(network.generators_at_bus()) {
    for (std::size_t l = 0; l < nl_; ++l) {
        if (std::isfinite(network.lines[l].s_max)) {
            limited_.push_back(l);
        }
    }
}

std::size_t AcopfPeriod::num_variables() const { return 2 * nb_ + 2 * ng_; }

std::size_t AcopfPeriod::num_equalities() const { return 2 * nb_; }

std::size_t AcopfPeriod::num_inequalities() const { return 2 * limited_.size() + 2 * nl_; }

void AcopfPeriod::bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const {
    lo.resize(static_cast<Eigen::Index>(num_variables()));
    hi.resize(lo.size());
    for (std::size_t i = 0; i < nb_; ++i) {
        const auto& bus = network_.buses[i];
        const auto a = static_cast<Eigen::Index>(va(i));
        lo[a] = i == ref_ ? 0.0 : -kInf;
        hi[a] = i == ref_ ? 0.0 : kInf;
        lo[static_cast<Eigen::Index>(vm(i))] = bus.v_min;
        hi[static_cast<Eigen::Index>(vm(i))] = bus.v_max;
    }
    for (std::size_t g = 0; g < ng_; ++g) {
        const auto& gen = network_.generators[g];
        lo[static_cast<Eigen::Index>(pg(g))] = gen.p_min;
        hi[static_cast<Eigen::Index>(pg(g))] = gen.p_max;
        lo[static_cast<Eigen::Index>(qg(g))] = gen.q_min;
        hi[static_cast<Eigen::Index>(qg(g))] = gen.q_max;
    }
}

double AcopfPeriod::objective(const Eigen::VectorXd& x, Eigen::VectorXd* gradient) const {
    double f = 0.0;
    if (gradient) {
        gradient->setZero(static_cast<Eigen::Index>(num_variables()));
    }
    for (std::size_t g = 0; g < ng_; ++g) {
        const auto& cost = network_.generators[g].cost;
        const double p = x[static_cast<Eigen::Index>(pg(g))];
        f += cost(p);
        if (gradient) {
            (*gradient)[static_cast<Eigen::Index>(pg(g))] = cost.derivative(p);
        }
    }
    return f;
}

void AcopfPeriod::constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::VectorXd& h,
                              Eigen::SparseMatrix<double>* jac_g,
                              Eigen::SparseMatrix<double>* jac_h) const {
    const auto nb = static_cast<Eigen::Index>(nb_);
    g.setZero(2 * nb);
    h.setZero(static_cast<Eigen::Index>(num_inequalities()));
    std::vector<Triplet> tg;
    std::vector<Triplet> th;
    for (std::size_t i = 0; i < nb_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto& bus = network_.buses[i];
        const double v = x[static_cast<Eigen::Index>(vm(i))];
        g[ii] = -pd_[ii] + ev_[ii] - bus.gs * v * v;
        g[nb + ii] = -qd_[ii] + bus.bs * v * v;
        if (jac_g) {
            tg.emplace_back(ii, vm(i), -2.0 * bus.gs * v);
            tg.emplace_back(nb + ii, vm(i), 2.0 * bus.bs * v);
        }
        for (std::size_t k : gens_at_[i]) {
            g[ii] += x[static_cast<Eigen::Index>(pg(k))];
            g[nb + ii] += x[static_cast<Eigen::Index>(qg(k))];
            if (jac_g) {
                tg.emplace_back(ii, pg(k), 1.0);
                tg.emplace_back(nb + ii, qg(k), 1.0);
            }
        }
    }
    std::size_t limit_row = 0;
    const auto angle_base = static_cast<Eigen::Index>(2 * limited_.size());
    for (std::size_t l = 0; l < nl_; ++l) {
        const auto& line = network_.lines[l];
        const std::size_t i = line.from;
        const std::size_t j = line.to;
        const std::array<Eigen::Index, 4> idx{static_cast<Eigen::Index>(va(i)),
                                              static_cast<Eigen::Index>(va(j)),
                                              static_cast<Eigen::Index>(vm(i)),
                                              static_cast<Eigen::Index>(vm(j))};
        const auto f = line_locals(line, x[idx[TI]], x[idx[TJ]], x[idx[VI]], x[idx[VJ]]);
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        const auto subtract = [&](Eigen::Index row, const Local& flow) {
            g[row] -= flow.v;
            if (jac_g) {
                for (int a = 0; a < 4; ++a) {
                    if (flow.g[a] != 0.0) {
                        tg.emplace_back(row, idx[a], -flow.g[a]);
                    }
                }
            }
        };
        subtract(ii, f.pij);
        subtract(nb + ii, f.qij);
        subtract(jj, f.pji);
        subtract(nb + jj, f.qji);
        if (std::isfinite(line.s_max)) {
            const double cap = line.s_max * line.s_max;
            for (const auto& mag : {squared_magnitude(f.pij, f.qij), squared_magnitude(f.pji, f.qji)}) {
                const auto row = static_cast<Eigen::Index>(limit_row++);
                h[row] = mag.v - cap;
                if (jac_h) {
                    for (int a = 0; a < 4; ++a) {
                        if (mag.g[a] != 0.0) {
                            th.emplace_back(row, idx[a], mag.g[a]);
                        }
                    }
                }
            }
        }
        const auto row = angle_base + 2 * static_cast<Eigen::Index>(l);
        const double diff = x[idx[TI]] - x[idx[TJ]];
        h[row] = diff - line.angle_max;
        h[row + 1] = -diff - line.angle_max;
        if (jac_h) {
            th.emplace_back(row, idx[TI], 1.0);
            th.emplace_back(row, idx[TJ], -1.0);
            th.emplace_back(row + 1, idx[TI], -1.0);
            th.emplace_back(row + 1, idx[TJ], 1.0);
        }
    }
    const auto n = static_cast<Eigen::Index>(num_variables());
    if (jac_g) {
        jac_g->resize(2 * nb, n);
        jac_g->setFromTriplets(tg.begin(), tg.end());
    }
    if (jac_h) {
        jac_h->resize(h.size(), n);
        jac_h->setFromTriplets(th.begin(), th.end());
    }
}

Eigen::SparseMatrix<double> AcopfPeriod::hessian(const Eigen::VectorXd& x,
                                                 double objective_factor,
                                                 const Eigen::VectorXd& lambda,
                                                 const Eigen::VectorXd& mu) const {
    const auto nb = static_cast<Eigen::Index>(nb_);
    std::vector<Triplet> t;
    for (std::size_t g = 0; g < ng_; ++g) {
        const double c2 = network_.generators[g].cost.quadratic;
        if (c2 != 0.0) {
            t.emplace_back(pg(g), pg(g), 2.0 * c2 * objective_factor);
        }
    }
    for (std::size_t i = 0; i < nb_; ++i) {
        const auto& bus = network_.buses[i];
        const auto ii = static_cast<Eigen::Index>(i);
        const double w = -2.0 * bus.gs * lambda[ii] + 2.0 * bus.bs * lambda[nb + ii];
        if (w != 0.0) {
            t.emplace_back(vm(i), vm(i), w);
        }
    }
    std::size_t limit_row = 0;
    for (std::size_t l = 0; l < nl_; ++l) {
        const auto& line = network_.lines[l];
        const std::size_t i = line.from;
        const std::size_t j = line.to;
        const std::array<Eigen::Index, 4> idx{static_cast<Eigen::Index>(va(i)),
                                              static_cast<Eigen::Index>(va(j)),
                                              static_cast<Eigen::Index>(vm(i)),
                                              static_cast<Eigen::Index>(vm(j))};
        const auto f = line_locals(line, x[idx[TI]], x[idx[TJ]], x[idx[VI]], x[idx[VJ]]);
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        Local total;
        total.add(-lambda[ii], f.pij);
        total.add(-lambda[nb + ii], f.qij);
        total.add(-lambda[jj], f.pji);
        total.add(-lambda[nb + jj], f.qji);
        if (std::isfinite(line.s_max)) {
            total.add(mu[static_cast<Eigen::Index>(limit_row++)], squared_magnitude(f.pij, f.qij));
            total.add(mu[static_cast<Eigen::Index>(limit_row++)], squared_magnitude(f.pji, f.qji));
        }
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                if (total.h[a][b] != 0.0) {
                    t.emplace_back(idx[a], idx[b], total.h[a][b]);
                }
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(num_variables());
    SpMat hess(n, n);
    hess.setFromTriplets(t.begin(), t.end());
    return hess;
}

Eigen::VectorXd AcopfPeriod::flat_start() const {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    bounds(lo, hi);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_variables()));
    for (std::size_t i = 0; i < nb_; ++i) {
        const auto k = static_cast<Eigen::Index>(vm(i));
        x[k] = std::clamp(1.0, lo[k], hi[k]);
    }
    for (std::size_t g = 0; g < ng_; ++g) {
        for (std::size_t k : {pg(g), qg(g)}) {
            const auto kk = static_cast<Eigen::Index>(k);
            x[kk] = 0.5 * (lo[kk] + hi[kk]);
        }
    }
    return x;
}

AcopfPeriod build_acopf_period(const MopfInstance& instance, std::size_t t,
                               const std::vector<double>& charge,
                               const std::vector<double>& discharge) {
    const auto& net = instance.network;
    const auto tt = static_cast<Eigen::Index>(t);
    Eigen::VectorXd ev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.buses.size()));
    for (std::size_t k = 0; k < instance.ev.size() && k < charge.size(); ++k) {
        const auto& bus = instance.ev[k];
        const double b = k < discharge.size() ? discharge[k] : 0.0;
        ev[static_cast<Eigen::Index>(bus.bus)] += -charge[k] + bus.efficiency * b;
    }
    return AcopfPeriod(net, instance.loads.p.col(tt), instance.loads.q.col(tt), std::move(ev));
}

double PeriodResiduals::max() const {
    return std::max({balance, flow_limit, angle, bounds, reference});
}

PeriodResiduals period_residuals(const AcopfPeriod& problem, const Eigen::VectorXd& x) {
    PeriodResiduals r;
    Eigen::VectorXd g;
    Eigen::VectorXd h;
    problem.constraints(x, g, h, nullptr, nullptr);
    r.balance = g.size() > 0 ? g.lpNorm<Eigen::Infinity>() : 0.0;
    const auto& net = problem.network();
    std::size_t row = 0;
    for (std::size_t l : problem.limited_lines()) {
        const double cap = net.lines[l].s_max;
        for (int end = 0; end < 2; ++end) {
            const double sq = h[static_cast<Eigen::Index>(row++)] + cap * cap;
            r.flow_limit = std::max(r.flow_limit, std::sqrt(std::max(sq, 0.0)) - cap);
        }
    }
    for (Eigen::Index k = static_cast<Eigen::Index>(row); k < h.size(); ++k) {
        r.angle = std::max(r.angle, h[k]);
    }
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    problem.bounds(lo, hi);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        r.bounds = std::max({r.bounds, lo[k] - x[k], x[k] - hi[k]});
    }
    r.reference = std::abs(x[static_cast<Eigen::Index>(problem.va(net.reference_bus()))]);
    return r;
}

}  // namespace evmopf
