#include "evmopf/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "evmopf/text_util.hpp"

namespace evmopf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MopfInstance without_ev(const MopfInstance& instance) {
    MopfInstance copy = instance;
    copy.ev.clear();
    copy.ev_enabled = false;
    copy.objective = Objective::cost;
    copy.emission_cap_kg.reset();
    return copy;
}

double relaxation_emission(const MopfInstance& instance, const SocpPoint& point) {
    return instance.marginal_emission(point.generation_per_period());
}

Eigen::MatrixXd clip(const Eigen::MatrixXd& m, const std::vector<EvBus>& ev, bool charge) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        const auto& caps = charge ? ev[static_cast<std::size_t>(k)].charge_max
                                  : ev[static_cast<std::size_t>(k)].discharge_max;
        for (Eigen::Index t = 0; t < out.cols(); ++t) {
            out(k, t) = std::clamp(out(k, t), 0.0, caps[static_cast<std::size_t>(t)]);
        }
    }
    return out;
}

std::string csv_number(double v) {
    return std::isnan(v) ? std::string() : text::format_double(v, 12);
}

}  // namespace

RelaxationResult solve_relaxation(const MopfInstance& instance, const ConicOptions& options) {
    RelaxationResult r;
    r.model = build_socp(instance);
    r.solution = solve_conic(r.model.program, options);
    if (r.solution.x.size() == r.model.program.num_variables()) {
        r.point = extract_point(r.model, r.solution.x);
    }
    return r;
}

RelaxationResult lower_bound_with_cap(const MopfInstance& instance, double cap_kg,
                                      const ConicOptions& options) {
    MopfInstance copy = instance;
    copy.objective = Objective::cost;
    copy.emission_cap_kg = cap_kg;
    auto r = solve_relaxation(copy, options);
    for (double rel : {1e-7, 1e-6, 1e-5}) {
        if (r.solution.status != ConicStatus::numerical_limit) {
            break;
        }
        const double slack = rel * std::max(1.0, std::abs(cap_kg));
        copy.emission_cap_kg = cap_kg + slack;
        r = solve_relaxation(copy, options);
        r.cap_slack_kg = slack;
    }
    return r;
}

BaselineResult baseline_generation(const MopfInstance& instance, const SolveOptions& options) {
    const MopfInstance plain = without_ev(instance);
    const auto nb = static_cast<Eigen::Index>(plain.network.buses.size());
    const auto T = static_cast<Eigen::Index>(plain.horizon());
    BaselineResult out;
    out.generation = Eigen::MatrixXd::Zero(nb, T);
    out.relaxation = solve_relaxation(plain, options.conic);
    const SocpPoint* warm = out.relaxation.ok() ? &out.relaxation.point : nullptr;
    const Eigen::MatrixXd none(0, T);
    out.evaluation = evaluate_schedule(plain, none, none, warm, options.local, options.threads);
    out.valid = out.evaluation.valid;
    out.cost = out.evaluation.cost;
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto& p = out.evaluation.periods[static_cast<std::size_t>(t)];
        for (std::size_t g = 0; g < plain.network.generators.size(); ++g) {
            out.generation(static_cast<Eigen::Index>(plain.network.generators[g].bus), t) +=
                p.pg[static_cast<Eigen::Index>(g)];
        }
    }
    return out;
}

void store_baseline(MopfInstance& instance, const BaselineResult& baseline) {
    instance.baseline = baseline.generation;
}

EmissionBounds emission_bounds(const MopfInstance& instance, const ConicOptions& options) {
    EmissionBounds b;
    MopfInstance em = instance;
    em.objective = Objective::emission;
    em.emission_cap_kg.reset();
    b.emission_relaxation = solve_relaxation(em, options);
    MopfInstance cost = instance;
    cost.objective = Objective::cost;
    cost.emission_cap_kg.reset();
    b.cost_relaxation = solve_relaxation(cost, options);
    b.valid = b.emission_relaxation.ok() && b.cost_relaxation.ok();
    if (!b.valid) {
        return b;
    }
    b.lbe = b.emission_relaxation.solution.objective;
    b.ube = relaxation_emission(instance, b.cost_relaxation.point);
    if (b.ube < b.lbe) {
        b.ube = std::max(b.ube, b.lbe);
    }
    bool flexible = false;
    for (const auto& ev : instance.ev) {
        for (std::size_t t = 0; t < ev.charge_max.size(); ++t) {
            flexible = flexible || ev.charge_max[t] > 0.0 || ev.discharge_max[t] > 0.0;
        }
    }
    b.degenerate = !flexible || b.ube - b.lbe <= 1e-6 * (1.0 + std::abs(b.ube));
    return b;
}

std::vector<double> cap_grid(double lbe, double ube, std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("cap grid needs at least one point");
    }
    if (n == 1 || ube <= lbe) {
        return {std::max(lbe, ube)};
    }
    std::vector<double> caps(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(n - 1);
        caps[k] = lbe + f * (ube - lbe);
    }
    caps.front() = lbe;
    caps.back() = ube;
    return caps;
}

double stock_conservation_residual(const MopfInstance& instance, const Eigen::MatrixXd& charge,
                                   const Eigen::MatrixXd& discharge) {
    double worst = 0.0;
    for (std::size_t k = 0; k < instance.ev.size(); ++k) {
        const auto& ev = instance.ev[k];
        double sum = 0.0;
        for (std::size_t t = 0; t < instance.horizon(); ++t) {
            sum += ev.efficiency * charge(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) -
                   discharge(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) -
                   ev.energy[t];
        }
        worst = std::max(worst, std::abs(sum));
    }
    return worst;
}

namespace {

void fill_from_evaluation(ParetoPoint& p, const ScheduleEvaluation& eval) {
    p.ub_cost = eval.cost;
    p.emission_kg = eval.emission_kg;
    p.period_cost = eval.period_cost;
    p.period_emission_kg = eval.period_emission_kg;
    p.generation = eval.generation;
    for (const auto& f : eval.failures) {
        p.messages.push_back(f.code + ": " + f.message);
    }
}

}  // namespace

ParetoPoint evaluate_cap(const MopfInstance& instance, double cap_kg, double lbe,
                         const SolveOptions& options) {
    ParetoPoint p;
    p.cap_kg = cap_kg;
    p.lb_cost = kNaN;
    p.gap_pct = kNaN;
    const auto relax = lower_bound_with_cap(instance, cap_kg, options.conic);
    if (!relax.ok()) {
        p.ub_cost = kNaN;
        p.emission_kg = kNaN;
        p.messages.push_back("relaxation at cap: " + to_string(relax.solution.status) + " (" +
                             relax.solution.message + ")");
        return p;
    }
    p.charge = clip(relax.point.a, instance.ev, true);
    p.discharge = clip(relax.point.b, instance.ev, false);
    conserve_energy(instance, p.charge, p.discharge);
    p.stock_residual = stock_conservation_residual(instance, p.charge, p.discharge);
    const auto eval = evaluate_schedule(instance, p.charge, p.discharge, &relax.point,
                                        options.local, options.threads);
    fill_from_evaluation(p, eval);
    if (!eval.valid) {
        return p;
    }
    const auto lb = lower_bound_with_cap(instance, std::max(p.emission_kg, lbe), options.conic);
    if (!lb.ok()) {
        p.messages.push_back("lower bound: " + to_string(lb.solution.status) + " (" +
                             lb.solution.message + ")");
        return p;
    }
    if (relax.cap_slack_kg > 0.0) {
        p.messages.push_back("cap loosened by " + text::format_double(relax.cap_slack_kg, 3) +
                             " kg for the schedule relaxation");
    }
    if (lb.cap_slack_kg > 0.0) {
        p.messages.push_back("cap loosened by " + text::format_double(lb.cap_slack_kg, 3) +
                             " kg for the lower bound");
    }
    p.lb_cost = lb.solution.certified_bound;
    if (!std::isfinite(p.lb_cost)) {
        p.lb_cost = lb.solution.dual_objective;
        p.messages.push_back("lower bound is the uncertified dual objective");
    }
    p.gap_pct = 100.0 * (1.0 - p.lb_cost / p.ub_cost);
    p.valid = true;
    return p;
}

ParetoPoint evaluate_benchmark(const MopfInstance& instance, const SolveOptions& options,
                               const SocpPoint* warm_start) {
    ParetoPoint p;
    p.tag = "benchmark";
    p.cap_kg = kNaN;
    p.lb_cost = kNaN;
    p.gap_pct = kNaN;
    const auto schedule = benchmark_charging(instance);
    p.charge = schedule.charge;
    p.discharge = schedule.discharge;
    p.stock_residual = stock_conservation_residual(instance, p.charge, p.discharge);
    for (const auto& issue : schedule.issues) {
        p.messages.push_back(issue.code + ": " + issue.message);
    }
    const auto eval = evaluate_schedule(instance, p.charge, p.discharge, warm_start,
                                        options.local, options.threads);
    fill_from_evaluation(p, eval);
    p.valid = eval.valid && schedule.feasible;
    return p;
}

PercentChange percent_changes(double cost_with, double cost_without, double emission_kg,
                              double gasoline_kg) {
    if (!(cost_without > 0.0)) {
        throw std::invalid_argument("cost without EVs must be positive");
    }
    if (!(gasoline_kg > 0.0)) {
        throw std::invalid_argument("gasoline emission must be positive");
    }
    return {100.0 * (cost_with / cost_without - 1.0), 100.0 * (emission_kg / gasoline_kg - 1.0)};
}

double gasoline_emission_kg(double grams_per_mile, double miles) {
    return grams_per_mile * miles / 1000.0;
}

ParetoRun run_pareto(MopfInstance& instance, const ParetoOptions& options) {
    ParetoRun run;
    run.baseline = baseline_generation(instance, options.solve);
    if (!run.baseline.valid) {
        throw std::runtime_error("baseline generation failed: " +
                                 (run.baseline.evaluation.failures.empty()
                                      ? run.baseline.relaxation.solution.message
                                      : run.baseline.evaluation.failures.front().message));
    }
    store_baseline(instance, run.baseline);
    run.bounds = emission_bounds(instance, options.solve.conic);
    if (!run.bounds.valid) {
        throw std::runtime_error("emission bound relaxations failed: " +
                                 run.bounds.emission_relaxation.solution.message + " / " +
                                 run.bounds.cost_relaxation.solution.message);
    }
    std::size_t n = options.points;
    if (run.bounds.degenerate) {
        run.warnings.push_back({"degenerate frontier",
                                "no EV flexibility or lowest and highest emission coincide (" +
                                    text::format_double(run.bounds.lbe, 9) + " to " +
                                    text::format_double(run.bounds.ube, 9) +
                                    " kg); the frontier has a single point"});
        n = 1;
    }
    for (double cap : cap_grid(run.bounds.lbe, run.bounds.ube, n)) {
        run.points.push_back(evaluate_cap(instance, cap, run.bounds.lbe, options.solve));
        const auto& p = run.points.back();
        if (p.valid && p.emission_kg > cap + 1e-6 * std::max(1.0, std::abs(cap))) {
            run.warnings.push_back(
                {"emission above cap", "cap " + text::format_double(cap, 9) + " kg: AC dispatch emits " +
                                           text::format_double(p.emission_kg, 9) +
                                           " kg because its losses exceed the relaxation's"});
        }
        if (!p.valid) {
            run.warnings.push_back({"invalid point", "cap " + text::format_double(cap, 9) +
                                                         " kg: " +
                                                         (p.messages.empty() ? std::string("failed")
                                                                             : p.messages.front())});
        }
    }
    if (options.include_benchmark) {
        const SocpPoint* warm =
            run.baseline.relaxation.ok() ? &run.baseline.relaxation.point : nullptr;
        run.benchmark = evaluate_benchmark(instance, options.solve, warm);
    }
    return run;
}

std::string frontier_csv(const std::vector<ParetoPoint>& points, double no_ev_cost,
                         double gasoline_kg) {
    std::ostringstream out;
    out << "cap_kg,ub_cost,lb_cost,emission_kg,gap_pct,cost_change_pct,emission_change_pct,valid,"
           "tag\n";
    for (const auto& p : points) {
        double cost_pct = kNaN;
        double emission_pct = kNaN;
        if (no_ev_cost > 0.0 && !std::isnan(p.ub_cost)) {
            cost_pct = 100.0 * (p.ub_cost / no_ev_cost - 1.0);
        }
        if (gasoline_kg > 0.0 && !std::isnan(p.emission_kg)) {
            emission_pct = 100.0 * (p.emission_kg / gasoline_kg - 1.0);
        }
        out << csv_number(p.cap_kg) << ',' << csv_number(p.ub_cost) << ','
            << csv_number(p.lb_cost) << ',' << csv_number(p.emission_kg) << ','
            << csv_number(p.gap_pct) << ',' << csv_number(cost_pct) << ','
            << csv_number(emission_pct) << ',' << (p.valid ? "true" : "false") << ',' << p.tag
            << '\n';
    }
    return out.str();
}

std::string hourly_csv(const MopfInstance& instance, const ParetoPoint& point) {
    std::ostringstream out;
    out << "period,gen_excl_ev,gen_for_ev,v2g_power\n";
    const double base = instance.network.base_mva;
    for (std::size_t t = 0; t < point.generation.size(); ++t) {
        double charge = 0.0;
        double v2g = 0.0;
        for (std::size_t k = 0; k < instance.ev.size(); ++k) {
            if (point.charge.size() > 0) {
                charge += point.charge(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
            }
            if (point.discharge.size() > 0) {
                v2g += instance.ev[k].efficiency *
                       point.discharge(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
            }
        }
        const double gen = point.generation[t] * base;
        out << t << ',' << csv_number(gen - charge * base) << ',' << csv_number(charge * base)
            << ',' << csv_number(v2g * base) << '\n';
    }
    return out.str();
}

}  // namespace evmopf
