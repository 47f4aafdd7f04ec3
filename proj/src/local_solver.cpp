#include "evmopf/local_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <queue>
#include <thread>

#include "evmopf/text_util.hpp"

namespace evmopf {

namespace {

double wrap_angle(double a) {
    return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

WarmStart warm_start_from_socp(const AcopfPeriod& problem, const SocpPoint& point, std::size_t t) {
    const auto& net = problem.network();
    const auto tt = static_cast<Eigen::Index>(t);
    WarmStart ws;
    ws.x = problem.flat_start();
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    problem.bounds(lo, hi);
    const std::size_t nb = net.buses.size();
    for (std::size_t i = 0; i < nb; ++i) {
        ws.x[static_cast<Eigen::Index>(problem.vm(i))] =
            std::sqrt(std::max(point.cii(static_cast<Eigen::Index>(i), tt), 0.0));
    }
    // Angle difference theta_from - theta_to implied by each line.
    std::vector<double> drop(net.lines.size());
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto ll = static_cast<Eigen::Index>(l);
        drop[l] = std::atan2(-point.sij(ll, tt), point.cij(ll, tt));
    }
    std::vector<double> theta(nb, 0.0);
    std::vector<bool> seen(nb, false);
    std::vector<bool> tree(net.lines.size(), false);
    const std::size_t ref = net.reference_bus();
    std::queue<std::size_t> queue;
    queue.push(ref);
    seen[ref] = true;
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop();
        for (std::size_t l : net.buses[i].lines) {
            const auto& line = net.lines[l];
            const std::size_t j = line.from == i ? line.to : line.from;
            if (seen[j]) {
                continue;
            }
            seen[j] = true;
            tree[l] = true;
            theta[j] = line.from == i ? theta[i] - drop[l] : theta[i] + drop[l];
            queue.push(j);
        }
    }
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        if (tree[l]) {
            continue;
        }
        const auto& line = net.lines[l];
        const double mismatch = wrap_angle(theta[line.from] - theta[line.to] - drop[l]);
        ws.max_cycle_mismatch = std::max(ws.max_cycle_mismatch, std::abs(mismatch));
        ws.diagnostics.push_back(
            {"cycle mismatch", "line " + std::to_string(net.buses[line.from].id) + "-" +
                                   std::to_string(net.buses[line.to].id) + " closes a cycle with angle residual " +
                                   text::format_double(mismatch, 6) + " rad"});
    }
    for (std::size_t i = 0; i < nb; ++i) {
        ws.x[static_cast<Eigen::Index>(problem.va(i))] = theta[i];
    }
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const auto gg = static_cast<Eigen::Index>(g);
        ws.x[static_cast<Eigen::Index>(problem.pg(g))] = point.pg(gg, tt);
        ws.x[static_cast<Eigen::Index>(problem.qg(g))] = point.qg(gg, tt);
    }
    ws.x = ws.x.cwiseMax(lo).cwiseMin(hi);
    return ws;
}

PeriodSolution solve_local(const AcopfPeriod& problem, const Eigen::VectorXd& start,
                           const LocalOptions& options) {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    problem.bounds(lo, hi);
    const Eigen::VectorXd x0 = start.cwiseMax(lo).cwiseMin(hi);
    const auto res = solve_nlp(problem, x0, options.nlp);
    const auto& net = problem.network();
    PeriodSolution sol;
    sol.status = res.status;
    sol.iterations = res.iterations;
    sol.message = res.message;
    sol.objective = res.objective;
    const auto nb = static_cast<Eigen::Index>(net.buses.size());
    const auto ng = static_cast<Eigen::Index>(net.generators.size());
    const auto nl = static_cast<Eigen::Index>(net.lines.size());
    sol.va = res.x.segment(0, nb);
    sol.vm = res.x.segment(nb, nb);
    sol.pg = res.x.segment(2 * nb, ng);
    sol.qg = res.x.segment(2 * nb + ng, ng);
    sol.pij.resize(nl);
    sol.qij.resize(nl);
    sol.pji.resize(nl);
    sol.qji.resize(nl);
    for (Eigen::Index l = 0; l < nl; ++l) {
        const auto& line = net.lines[static_cast<std::size_t>(l)];
        const auto f = branch_flows_polar(line.y, sol.vm[static_cast<Eigen::Index>(line.from)],
                                          sol.vm[static_cast<Eigen::Index>(line.to)],
                                          sol.va[static_cast<Eigen::Index>(line.from)],
                                          sol.va[static_cast<Eigen::Index>(line.to)]);
        sol.pij[l] = f.p_ij;
        sol.qij[l] = f.q_ij;
        sol.pji[l] = f.p_ji;
        sol.qji[l] = f.q_ji;
    }
    sol.residuals = period_residuals(problem, res.x);
    if (sol.ok() && sol.residuals.max() > options.residual_tol) {
        sol.status = NlpStatus::residual_check_failed;
        sol.message = "final point violates constraints by " +
                      text::format_double(sol.residuals.max(), 3);
    }
    return sol;
}

PeriodSolution solve_with_retry(const AcopfPeriod& problem, const Eigen::VectorXd& start,
                                const LocalOptions& options) {
    auto sol = solve_local(problem, start, options);
    if (sol.ok() || !options.retry_flat_start) {
        return sol;
    }
    auto retry = solve_local(problem, problem.flat_start(), options);
    retry.flat_start = true;
    if (retry.ok()) {
        return retry;
    }
    retry.message = "warm start: " + sol.message + "; flat start: " + retry.message;
    return retry;
}

Eigen::MatrixXd stock_trajectory(const MopfInstance& instance, const Eigen::MatrixXd& charge,
                                 const Eigen::MatrixXd& discharge) {
    const auto E = static_cast<Eigen::Index>(instance.ev.size());
    const auto T = static_cast<Eigen::Index>(instance.horizon());
    Eigen::MatrixXd stock(E, T + 1);
    for (Eigen::Index k = 0; k < E; ++k) {
        const auto& ev = instance.ev[static_cast<std::size_t>(k)];
        stock(k, 0) = ev.initial;
        for (Eigen::Index t = 0; t < T; ++t) {
            stock(k, t + 1) = stock(k, t) + ev.efficiency * charge(k, t) - discharge(k, t) -
                              ev.energy[static_cast<std::size_t>(t)];
        }
    }
    return stock;
}

double conserve_energy(const MopfInstance& instance, Eigen::MatrixXd& charge,
                       Eigen::MatrixXd& discharge) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < charge.rows(); ++k) {
        const auto& ev = instance.ev[static_cast<std::size_t>(k)];
        double need = 0.0;  // net inflow still missing; negative for a surplus
        for (Eigen::Index t = 0; t < charge.cols(); ++t) {
            need += ev.energy[static_cast<std::size_t>(t)] - ev.efficiency * charge(k, t) +
                    discharge(k, t);
        }
        // Moves entries of one row by `direction` (+1 or -1), each unit changing the inflow by
        // `gain`, until `remaining` inflow is covered or the room runs out.
        const auto move = [&](Eigen::MatrixXd& m, double direction, double gain, double remaining,
                              const std::vector<double>& room) {
            std::vector<Eigen::Index> order(room.size());
            for (std::size_t t = 0; t < room.size(); ++t) {
                order[t] = static_cast<Eigen::Index>(t);
            }
            std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
                return room[static_cast<std::size_t>(x)] > room[static_cast<std::size_t>(y)];
            });
            for (Eigen::Index t : order) {
                const double step = std::min(room[static_cast<std::size_t>(t)], remaining / gain);
                if (remaining <= 0.0 || step <= 0.0) {
                    break;
                }
                m(k, t) += direction * step;
                remaining -= step * gain;
            }
            return std::max(remaining, 0.0);
        };
        const auto T = static_cast<std::size_t>(charge.cols());
        std::vector<double> a_room(T), a_used(T), b_room(T), b_used(T);
        for (std::size_t t = 0; t < T; ++t) {
            const auto tt = static_cast<Eigen::Index>(t);
            a_used[t] = charge(k, tt);
            a_room[t] = ev.charge_max[t] - charge(k, tt);
            b_used[t] = discharge(k, tt);
            b_room[t] = ev.discharge_max[t] - discharge(k, tt);
        }
        double left = 0.0;
        if (need > 0.0) {
            left = move(discharge, -1.0, 1.0, need, b_used);
            left = move(charge, 1.0, ev.efficiency, left, a_room);
        } else if (need < 0.0) {
            left = move(charge, -1.0, ev.efficiency, -need, a_used);
            left = move(discharge, 1.0, 1.0, left, b_room);
        }
        worst = std::max(worst, left);
    }
    return worst;
}

ChargingSchedule benchmark_charging(const MopfInstance& instance) {
    const auto E = static_cast<Eigen::Index>(instance.ev.size());
    const auto T = static_cast<Eigen::Index>(instance.horizon());
    ChargingSchedule sch;
    sch.charge = Eigen::MatrixXd::Zero(E, T);
    sch.discharge = Eigen::MatrixXd::Zero(E, T);
    const double base = instance.network.base_mva;
    for (Eigen::Index k = 0; k < E; ++k) {
        const auto& ev = instance.ev[static_cast<std::size_t>(k)];
        double remaining = 0.0;
        for (double c : ev.energy) {
            remaining += c;
        }
        const double need = remaining;
        for (Eigen::Index t = 0; t < T && remaining > 0.0; ++t) {
            const double a = std::min(ev.charge_max[static_cast<std::size_t>(t)],
                                      remaining / ev.efficiency);
            sch.charge(k, t) = a;
            remaining -= ev.efficiency * a;
        }
        if (remaining > 1e-12 * std::max(1.0, need)) {
            sch.feasible = false;
            sch.issues.push_back({"insufficient charging",
                                  "bus " + std::to_string(instance.network.buses[ev.bus].id) +
                                      ": " + text::format_double(pu_to_kwh(remaining, base), 6) +
                                      " kWh of driving energy cannot be charged"});
        }
    }
    sch.stock = stock_trajectory(instance, sch.charge, sch.discharge);
    for (Eigen::Index k = 0; k < E; ++k) {
        const auto& ev = instance.ev[static_cast<std::size_t>(k)];
        const double tol = 1e-9 * std::max(1.0, ev.stock_max.empty() ? 1.0 : ev.stock_max[0]);
        for (Eigen::Index t = 0; t < T; ++t) {
            const double s = sch.stock(k, t);
            const auto tt = static_cast<std::size_t>(t);
            if (s < ev.stock_min[tt] - tol || s > ev.stock_max[tt] + tol) {
                sch.feasible = false;
                sch.issues.push_back(
                    {"stock bound", "bus " + std::to_string(instance.network.buses[ev.bus].id) +
                                        " period " + std::to_string(t) + ": stock " +
                                        text::format_double(pu_to_kwh(s, base), 6) +
                                        " kWh outside [" +
                                        text::format_double(pu_to_kwh(ev.stock_min[tt], base), 6) +
                                        ", " +
                                        text::format_double(pu_to_kwh(ev.stock_max[tt], base), 6) +
                                        "]"});
            }
        }
    }
    return sch;
}

ScheduleEvaluation evaluate_schedule(const MopfInstance& instance, const Eigen::MatrixXd& charge,
                                     const Eigen::MatrixXd& discharge,
                                     const SocpPoint* relaxation, const LocalOptions& options,
                                     std::size_t threads) {
    const std::size_t T = instance.horizon();
    ScheduleEvaluation ev;
    ev.periods.resize(T);
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t t = next++; t < T; t = next++) {
            std::vector<double> a(instance.ev.size());
            std::vector<double> b(instance.ev.size());
            for (std::size_t k = 0; k < instance.ev.size(); ++k) {
                a[k] = charge(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
                b[k] = discharge(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
            }
            const auto problem = build_acopf_period(instance, t, a, b);
            const Eigen::VectorXd start =
                relaxation ? warm_start_from_socp(problem, *relaxation, t).x : problem.flat_start();
            ev.periods[t] = solve_with_retry(problem, start, options);
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, T));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n_threads; ++k) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    ev.valid = true;
    const double base = instance.network.base_mva;
    for (std::size_t t = 0; t < T; ++t) {
        const auto& p = ev.periods[t];
        if (!p.ok()) {
            ev.valid = false;
            ev.failures.push_back({to_string(p.status), "period " + std::to_string(t) + ": " + p.message});
        }
        const double gen = p.pg.sum();
        const double kg = instance.has_emissions()
                              ? instance.emission[t] * base * (gen - instance.baseline_total(t))
                              : 0.0;
        ev.generation.push_back(gen);
        ev.period_cost.push_back(p.objective);
        ev.period_emission_kg.push_back(kg);
        ev.cost += p.objective;
        ev.emission_kg += kg;
    }
    return ev;
}

}  // namespace evmopf
