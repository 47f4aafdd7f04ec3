#include "evmopf/socp_builder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace evmopf {

namespace {

bool uses_epigraph(const MopfInstance& instance, const Generator& g) {
    return instance.objective == Objective::cost && g.cost.quadratic > 0.0;
}

std::string tag(const char* kind, std::size_t k, std::size_t t) {
    return std::string(kind) + '_' + std::to_string(k) + '_' + std::to_string(t);
}

/// Boxes for the columns the rows and cones bound implicitly: |c_ij|, |s_ij| <= Vi Vj, the
/// flows through their definitions (and the thermal limit), the cost epigraph at its optimum
/// z = pg^2, and the stock endpoints fixed at the initial charge.
void set_implied_boxes(const MopfInstance& instance, SocpModel& model) {
    const auto& net = instance.network;
    auto& prog = model.program;
    prog.implied_lb = prog.lb;
    prog.implied_ub = prog.ub;
    const auto box = [&](std::size_t j, double lo, double hi) {
        prog.implied_lb[j] = std::max(prog.implied_lb[j], lo);
        prog.implied_ub[j] = std::min(prog.implied_ub[j], hi);
    };
    for (const auto& cols : model.layout.periods) {
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
            const auto& line = net.lines[l];
            const auto& y = line.y;
            const double vi = net.buses[line.from].v_max;
            const double vj = net.buses[line.to].v_max;
            const double m = vi * vj;
            box(cols.cij[l], -m, m);
            box(cols.sij[l], -m, m);
            const auto flow = [&](std::size_t j, double self, double v, double g, double b) {
                const double f = std::min(std::abs(self) * v * v + (std::abs(g) + std::abs(b)) * m,
                                          line.s_max);
                box(j, -f, f);
            };
            flow(cols.pij[l], y.g_ff, vi, y.g_ij, y.b_ij);
            flow(cols.qij[l], y.b_ff, vi, y.b_ij, y.g_ij);
            flow(cols.pji[l], y.g_tt, vj, y.g_ji, y.b_ji);
            flow(cols.qji[l], y.b_tt, vj, y.b_ji, y.g_ji);
        }
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            if (cols.z[g] != kNoColumn) {
                const auto& gen = net.generators[g];
                box(cols.z[g], 0.0, std::max(gen.p_min * gen.p_min, gen.p_max * gen.p_max));
            }
        }
    }
    for (std::size_t k = 0; k < model.layout.stock.size(); ++k) {
        const double init = instance.ev[k].initial;
        box(model.layout.stock[k].front(), init, init);
        box(model.layout.stock[k].back(), init, init);
    }
}

}  // namespace

std::size_t socp_variable_count(const MopfInstance& instance) {
    const auto& net = instance.network;
    std::size_t quad = 0;
    for (const auto& g : net.generators) {
        quad += uses_epigraph(instance, g) ? 1 : 0;
    }
    const std::size_t T = instance.horizon();
    const std::size_t E = instance.ev.size();
    return T * (2 * net.generators.size() + net.buses.size() + 6 * net.lines.size() + 2 * E +
                quad) +
           (T + 1) * E;
}

SocpModel build_socp(const MopfInstance& instance) {
    const auto& net = instance.network;
    for (const auto& g : net.generators) {
        if (!g.cost.is_convex()) {
            throw std::invalid_argument("nonconvex cost coefficient on generator at bus " +
                                        std::to_string(net.buses[g.bus].id));
        }
    }
    const std::size_t T = instance.horizon();
    const std::size_t E = instance.ev.size();
    const double base = net.base_mva;
    SocpModel model;
    auto& prog = model.program;
    auto& layout = model.layout;
    const auto gens_at = net.generators_at_bus();

    layout.periods.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        auto& cols = layout.periods[t];
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            const auto& gen = net.generators[g];
            double cost = 0.0;
            if (instance.objective == Objective::cost) {
                cost = gen.cost.linear;
                prog.offset += gen.cost.constant;
            } else {
                cost = instance.emission[t] * base;
            }
            cols.pg.push_back(prog.add_variable(tag("pg", g, t), gen.p_min, gen.p_max, cost));
            cols.qg.push_back(prog.add_variable(tag("qg", g, t), gen.q_min, gen.q_max));
            if (uses_epigraph(instance, gen)) {
                cols.z.push_back(
                    prog.add_variable(tag("z", g, t), 0.0, kInf, gen.cost.quadratic));
            } else {
                cols.z.push_back(kNoColumn);
            }
        }
        for (std::size_t i = 0; i < net.buses.size(); ++i) {
            const auto& bus = net.buses[i];
            cols.cii.push_back(prog.add_variable(tag("cii", i, t), bus.v_min * bus.v_min,
                                                 bus.v_max * bus.v_max));
        }
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
            cols.cij.push_back(prog.add_variable(tag("cij", l, t), -kInf, kInf));
            cols.sij.push_back(prog.add_variable(tag("sij", l, t), -kInf, kInf));
            cols.pij.push_back(prog.add_variable(tag("pij", l, t), -kInf, kInf));
            cols.qij.push_back(prog.add_variable(tag("qij", l, t), -kInf, kInf));
            cols.pji.push_back(prog.add_variable(tag("pji", l, t), -kInf, kInf));
            cols.qji.push_back(prog.add_variable(tag("qji", l, t), -kInf, kInf));
        }
        for (std::size_t k = 0; k < E; ++k) {
            const auto& ev = instance.ev[k];
            cols.a.push_back(prog.add_variable(tag("a", ev.bus, t), 0.0, ev.charge_max[t]));
            cols.b.push_back(prog.add_variable(tag("b", ev.bus, t), 0.0, ev.discharge_max[t]));
        }
    }
    layout.stock.resize(E);
    for (std::size_t k = 0; k < E; ++k) {
        const auto& ev = instance.ev[k];
        for (std::size_t t = 0; t <= T; ++t) {
            double lo = -kInf;
            double hi = kInf;
            const bool boundary_inside =
                ev.stock_min[0] <= ev.initial && ev.initial <= ev.stock_max[0];
            if (t < T && !(t == 0 && boundary_inside)) {
                lo = ev.stock_min[t];
                hi = ev.stock_max[t];
            }
            layout.stock[k].push_back(prog.add_variable(tag("s", ev.bus, t), lo, hi));
        }
        for (std::size_t t : {std::size_t{0}, T}) {
            LinearRow row;
            row.name = tag("stock_boundary", ev.bus, t);
            row.terms = {{layout.stock[k][t], 1.0}};
            row.lower = row.upper = ev.initial;
            prog.add_row(std::move(row));
        }
    }
    layout.num_variables = prog.num_variables();

    for (std::size_t t = 0; t < T; ++t) {
        const auto& cols = layout.periods[t];
        // Bus balance rows.
        for (std::size_t i = 0; i < net.buses.size(); ++i) {
            const auto& bus = net.buses[i];
            LinearRow p_row;
            LinearRow q_row;
            p_row.name = tag("pbal", i, t);
            q_row.name = tag("qbal", i, t);
            for (std::size_t g : gens_at[i]) {
                p_row.terms.emplace_back(cols.pg[g], 1.0);
                q_row.terms.emplace_back(cols.qg[g], 1.0);
            }
            p_row.terms.emplace_back(cols.cii[i], -bus.gs);
            q_row.terms.emplace_back(cols.cii[i], bus.bs);
            for (std::size_t l : bus.lines) {
                const auto& line = net.lines[l];
                if (line.from == i) {
                    p_row.terms.emplace_back(cols.pij[l], -1.0);
                    q_row.terms.emplace_back(cols.qij[l], -1.0);
                } else {
                    p_row.terms.emplace_back(cols.pji[l], -1.0);
                    q_row.terms.emplace_back(cols.qji[l], -1.0);
                }
            }
            const std::size_t slot = instance.ev_slot(i);
            if (slot != kNoColumn) {
                p_row.terms.emplace_back(cols.a[slot], -1.0);
                p_row.terms.emplace_back(cols.b[slot], instance.ev[slot].efficiency);
            }
            const double pd = instance.loads.p(static_cast<Eigen::Index>(i),
                                               static_cast<Eigen::Index>(t));
            const double qd = instance.loads.q(static_cast<Eigen::Index>(i),
                                               static_cast<Eigen::Index>(t));
            p_row.lower = p_row.upper = pd;
            q_row.lower = q_row.upper = qd;
            prog.add_row(std::move(p_row));
            prog.add_row(std::move(q_row));
        }
        // Flow definitions, lifted voltage cones and thermal limits.
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
            const auto& line = net.lines[l];
            const auto& y = line.y;
            const std::size_t ci = cols.cii[line.from];
            const std::size_t cj = cols.cii[line.to];
            const std::size_t c = cols.cij[l];
            const std::size_t s = cols.sij[l];
            const auto def = [&](const char* name, std::size_t flow, std::size_t square,
                                 double sq_coef, double c_coef, double s_coef) {
                LinearRow row;
                row.name = tag(name, l, t);
                row.terms = {{flow, 1.0}, {square, -sq_coef}, {c, -c_coef}, {s, -s_coef}};
                row.lower = row.upper = 0.0;
                prog.add_row(std::move(row));
            };
            def("pij_def", cols.pij[l], ci, y.g_ff, -y.g_ij, y.b_ij);
            def("qij_def", cols.qij[l], ci, -y.b_ff, y.b_ij, y.g_ij);
            def("pji_def", cols.pji[l], cj, y.g_tt, -y.g_ji, -y.b_ji);
            def("qji_def", cols.qji[l], cj, -y.b_tt, y.b_ji, -y.g_ji);

            ConeBlock lifted;
            lifted.kind = ConeKind::rotated;
            lifted.name = tag("lift", l, t);
            lifted.entries = {AffineExpr::variable(ci, 0.5), AffineExpr::variable(cj),
                              AffineExpr::variable(c), AffineExpr::variable(s)};
            prog.add_cone(std::move(lifted));

            if (std::isfinite(line.s_max)) {
                ConeBlock from;
                from.name = tag("smax_from", l, t);
                from.entries = {AffineExpr(line.s_max), AffineExpr::variable(cols.pij[l]),
                                AffineExpr::variable(cols.qij[l])};
                prog.add_cone(std::move(from));
                ConeBlock to;
                to.name = tag("smax_to", l, t);
                to.entries = {AffineExpr(line.s_max), AffineExpr::variable(cols.pji[l]),
                              AffineExpr::variable(cols.qji[l])};
                prog.add_cone(std::move(to));
            }
        }
        // Cost epigraphs: z >= p^2 as 2 * z * 0.5 >= p^2, with c2 z in the objective.
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            if (cols.z[g] == kNoColumn) {
                continue;
            }
            ConeBlock epi;
            epi.kind = ConeKind::rotated;
            epi.name = tag("cost", g, t);
            epi.entries = {AffineExpr::variable(cols.z[g]),
                           AffineExpr(0.5),
                           AffineExpr::variable(cols.pg[g])};
            prog.add_cone(std::move(epi));
        }
    }
    // Battery stock dynamics: s[t+1] = s[t] + eta a[t] - b[t] - c[t].
    for (std::size_t k = 0; k < E; ++k) {
        const auto& ev = instance.ev[k];
        for (std::size_t t = 0; t < T; ++t) {
            LinearRow row;
            row.name = tag("stock", ev.bus, t);
            row.terms = {{layout.stock[k][t + 1], 1.0},
                         {layout.stock[k][t], -1.0},
                         {layout.periods[t].a[k], -ev.efficiency},
                         {layout.periods[t].b[k], 1.0}};
            row.lower = row.upper = -ev.energy[t];
            prog.add_row(std::move(row));
        }
    }
    double baseline_kg = 0.0;
    for (std::size_t t = 0; t < T && instance.has_emissions(); ++t) {
        baseline_kg += instance.emission[t] * base * instance.baseline_total(t);
    }
    if (instance.objective == Objective::emission) {
        prog.offset -= baseline_kg;
    }
    if (instance.emission_cap_kg) {
        LinearRow row;
        row.name = "emission_cap";
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t g = 0; g < net.generators.size(); ++g) {
                row.terms.emplace_back(layout.periods[t].pg[g], instance.emission[t] * base);
            }
        }
        row.upper = *instance.emission_cap_kg + baseline_kg;
        model.emission_row = prog.rows.size();
        prog.add_row(std::move(row));
    }
    set_implied_boxes(instance, model);
    return model;
}

std::vector<double> SocpPoint::generation_per_period() const {
    std::vector<double> out(static_cast<std::size_t>(pg.cols()), 0.0);
    for (Eigen::Index t = 0; t < pg.cols(); ++t) {
        out[static_cast<std::size_t>(t)] = pg.col(t).sum();
    }
    return out;
}

SocpPoint extract_point(const SocpModel& model, const std::vector<double>& x) {
    const auto& periods = model.layout.periods;
    const auto T = static_cast<Eigen::Index>(periods.size());
    SocpPoint p;
    if (periods.empty()) {
        return p;
    }
    const auto fill = [&](Eigen::MatrixXd& m, auto member) {
        const auto rows = static_cast<Eigen::Index>((periods.front().*member).size());
        m.resize(rows, T);
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto& cols = periods[static_cast<std::size_t>(t)].*member;
            for (Eigen::Index r = 0; r < rows; ++r) {
                m(r, t) = x[cols[static_cast<std::size_t>(r)]];
            }
        }
    };
    fill(p.pg, &PeriodColumns::pg);
    fill(p.qg, &PeriodColumns::qg);
    fill(p.cii, &PeriodColumns::cii);
    fill(p.cij, &PeriodColumns::cij);
    fill(p.sij, &PeriodColumns::sij);
    fill(p.pij, &PeriodColumns::pij);
    fill(p.qij, &PeriodColumns::qij);
    fill(p.pji, &PeriodColumns::pji);
    fill(p.qji, &PeriodColumns::qji);
    fill(p.a, &PeriodColumns::a);
    fill(p.b, &PeriodColumns::b);
    const auto& stock = model.layout.stock;
    p.stock.resize(static_cast<Eigen::Index>(stock.size()), T + 1);
    for (std::size_t k = 0; k < stock.size(); ++k) {
        for (std::size_t t = 0; t < stock[k].size(); ++t) {
            p.stock(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = x[stock[k][t]];
        }
    }
    return p;
}

double generation_cost(const MopfInstance& instance, const Eigen::MatrixXd& pg) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < pg.cols(); ++t) {
        for (Eigen::Index g = 0; g < pg.rows(); ++g) {
            total += instance.network.generators[static_cast<std::size_t>(g)].cost(pg(g, t));
        }
    }
    return total;
}

ConsistencyStats consistency_residuals(const MopfInstance& instance, const SocpPoint& point) {
    const auto& lines = instance.network.lines;
    const auto L = static_cast<Eigen::Index>(lines.size());
    const Eigen::Index T = point.cii.cols();
    ConsistencyStats st;
    st.residual.resize(L, T);
    if (L == 0 || T == 0) {
        st.exact = true;
        return st;
    }
    double sum = 0.0;
    st.max_residual = -kInf;
    st.min_residual = kInf;
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto& line = lines[static_cast<std::size_t>(l)];
        for (Eigen::Index t = 0; t < T; ++t) {
            const double prod = point.cii(static_cast<Eigen::Index>(line.from), t) *
                                point.cii(static_cast<Eigen::Index>(line.to), t);
            const double r = prod - point.cij(l, t) * point.cij(l, t) -
                             point.sij(l, t) * point.sij(l, t);
            st.residual(l, t) = r;
            st.scale = std::max(st.scale, prod);
            st.max_residual = std::max(st.max_residual, r);
            st.min_residual = std::min(st.min_residual, r);
            sum += r;
        }
    }
    st.mean_residual = sum / static_cast<double>(L * T);
    st.exact = st.max_residual <= 1e-6 * st.scale;
    return st;
}

std::vector<double> lift_to_socp(const MopfInstance& instance, const SocpModel& model,
                                 const PolarTrajectory& point) {
    const auto& net = instance.network;
    std::vector<double> x(model.program.num_variables(), 0.0);
    for (std::size_t t = 0; t < model.layout.periods.size(); ++t) {
        const auto& cols = model.layout.periods[t];
        const auto tt = static_cast<Eigen::Index>(t);
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            const double p = point.pg(static_cast<Eigen::Index>(g), tt);
            x[cols.pg[g]] = p;
            x[cols.qg[g]] = point.qg(static_cast<Eigen::Index>(g), tt);
            if (cols.z[g] != kNoColumn) {
                x[cols.z[g]] = p * p;
            }
        }
        for (std::size_t i = 0; i < net.buses.size(); ++i) {
            const double v = point.vm(static_cast<Eigen::Index>(i), tt);
            x[cols.cii[i]] = v * v;
        }
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
            const auto& line = net.lines[l];
            const double vi = point.vm(static_cast<Eigen::Index>(line.from), tt);
            const double vj = point.vm(static_cast<Eigen::Index>(line.to), tt);
            const double d = point.va(static_cast<Eigen::Index>(line.from), tt) -
                             point.va(static_cast<Eigen::Index>(line.to), tt);
            const double c = vi * vj * std::cos(d);
            const double s = -vi * vj * std::sin(d);
            const auto f = branch_flows(line.y, vi * vi, vj * vj, c, s);
            x[cols.cij[l]] = c;
            x[cols.sij[l]] = s;
            x[cols.pij[l]] = f.p_ij;
            x[cols.qij[l]] = f.q_ij;
            x[cols.pji[l]] = f.p_ji;
            x[cols.qji[l]] = f.q_ji;
        }
        for (std::size_t k = 0; k < cols.a.size(); ++k) {
            x[cols.a[k]] = point.a(static_cast<Eigen::Index>(k), tt);
            x[cols.b[k]] = point.b(static_cast<Eigen::Index>(k), tt);
        }
    }
    for (std::size_t k = 0; k < model.layout.stock.size(); ++k) {
        for (std::size_t t = 0; t < model.layout.stock[k].size(); ++t) {
            x[model.layout.stock[k][t]] =
                point.stock(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
        }
    }
    return x;
}

}  // namespace evmopf
