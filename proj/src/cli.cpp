#include "evmopf/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "evmopf/case_parser.hpp"
#include "evmopf/conic_program.hpp"
#include "evmopf/text_util.hpp"
#include "evmopf/timeseries.hpp"

namespace evmopf {

namespace {

constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

void reject_unknown(const YAML::Node& node, const std::string& section,
                    const std::set<std::string>& allowed) {
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            throw InputError("unknown config key '" + section + key + "'");
        }
    }
}

template <class T>
void read_value(const YAML::Node& node, const char* key, T& target, const std::string& section) {
    if (!node[key]) {
        return;
    }
    try {
        target = node[key].as<T>();
    } catch (const YAML::Exception&) {
        throw InputError("config key '" + section + key + "' has an invalid value");
    }
}

void read_path(const YAML::Node& node, const char* key, fs::path& target, const fs::path& base,
               const std::string& section) {
    std::string s;
    read_value(node, key, s, section);
    if (!s.empty()) {
        const fs::path p(s);
        target = p.is_absolute() ? p : base / p;
    }
}

void read_optional(const YAML::Node& node, const char* key, std::optional<double>& target,
                   const std::string& section) {
    if (node[key] && !node[key].IsNull()) {
        double v = 0.0;
        read_value(node, key, v, section);
        target = v;
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    out << text;
}

std::vector<double> read_series(const fs::path& path) {
    try {
        return read_hourly_csv(path);
    } catch (const std::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s;
}

Json config_json(const RunConfig& c) {
    Json j;
    j["case"] = fs::absolute(c.case_path).string();
    j["demand"] = {{"summer", fs::absolute(c.summer_demand).string()},
                   {"winter", c.winter_demand.empty() ? "" : fs::absolute(c.winter_demand).string()},
                   {"season", c.season}};
    j["emission"] = c.emission_path.empty() ? "" : fs::absolute(c.emission_path).string();
    j["trips"] = c.trips_path.empty() ? "" : fs::absolute(c.trips_path).string();
    Json ev;
    ev["enabled"] = c.ev;
    ev["v2g"] = c.v2g;
    ev["kwh_per_mile"] = c.kwh_per_mile;
    ev["charger_kw"] = c.charging.charger_kw;
    ev["usable_kwh"] = c.charging.usable_kwh;
    ev["efficiency"] = c.charging.efficiency;
    ev["weight"] = c.weight ? Json(*c.weight) : Json(nullptr);
    j["ev"] = ev;
    j["sweep"] = {{"points", c.points},
                  {"benchmark", c.benchmark},
                  {"gasoline_g_per_mile",
                   c.gasoline_g_per_mile ? Json(*c.gasoline_g_per_mile) : Json(nullptr)}};
    j["solver"] = {{"threads", c.threads}, {"conic_tol", c.conic_tol}, {"nlp_tol", c.nlp_tol}};
    j["output"] = fs::absolute(c.output_dir).string();
    return j;
}

void print_diagnostics(std::ostream& os, const std::string& kind, const std::vector<Diagnostic>& ds) {
    for (const auto& d : ds) {
        os << kind << ": " << d.code << ": " << d.message << '\n';
    }
}

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct Overrides {
    std::string config;
    std::string case_path, summer, winter, season, emission, trips, output;
    std::optional<std::size_t> points, threads;
    std::optional<double> conic_tol, nlp_tol, gasoline, weight;
    bool no_ev = false;
    bool no_v2g = false;
    bool benchmark = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "YAML run configuration");
    cmd->add_option("--case", o.case_path, "MATPOWER case file");
    cmd->add_option("--summer", o.summer, "summer demand CSV (hour,value in kWh)");
    cmd->add_option("--winter", o.winter, "winter demand CSV (hour,value in kWh)");
    cmd->add_option("--season", o.season, "season used to scale loads")
        ->check(CLI::IsMember({"summer", "winter"}));
    cmd->add_option("--emission", o.emission, "marginal emission CSV (hour,value in kg/MWh)");
    cmd->add_option("--trips", o.trips, "trip CSV");
    cmd->add_option("-o,--output", o.output, "output directory");
    cmd->add_option("--points", o.points, "number of emission caps");
    cmd->add_option("--threads", o.threads, "worker threads for the per-period solves");
    cmd->add_option("--conic-tol", o.conic_tol, "relaxation tolerance");
    cmd->add_option("--nlp-tol", o.nlp_tol, "per-period NLP gradient tolerance");
    cmd->add_option("--gasoline", o.gasoline, "gasoline emission in g CO2 per mile");
    cmd->add_option("--weight", o.weight, "override the demand-consistency weight");
    cmd->add_flag("--no-ev", o.no_ev, "run without EVs");
    cmd->add_flag("--no-v2g", o.no_v2g, "forbid discharging");
    cmd->add_flag("--benchmark", o.benchmark, "append the midnight-charging benchmark");
}

RunConfig resolve_config(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (const char* env = std::getenv("EVMOPF_THREADS")) {
        const auto n = text::parse_int(env);
        if (!n || *n < 1) {
            throw InputError("EVMOPF_THREADS must be a positive integer");
        }
        c.threads = static_cast<std::size_t>(*n);
    }
    if (!o.case_path.empty()) c.case_path = o.case_path;
    if (!o.summer.empty()) c.summer_demand = o.summer;
    if (!o.winter.empty()) c.winter_demand = o.winter;
    if (!o.season.empty()) c.season = o.season;
    if (!o.emission.empty()) c.emission_path = o.emission;
    if (!o.trips.empty()) c.trips_path = o.trips;
    if (!o.output.empty()) c.output_dir = o.output;
    if (o.points) c.points = *o.points;
    if (o.threads) c.threads = *o.threads;
    if (o.conic_tol) c.conic_tol = *o.conic_tol;
    if (o.nlp_tol) c.nlp_tol = *o.nlp_tol;
    if (o.gasoline) c.gasoline_g_per_mile = o.gasoline;
    if (o.weight) c.weight = o.weight;
    if (o.no_ev) c.ev = false;
    if (o.no_v2g) c.v2g = false;
    if (o.benchmark) c.benchmark = true;
    return c;
}

Json point_json(const ParetoPoint& p) {
    const auto num = [](double v) { return std::isnan(v) ? Json(nullptr) : Json(v); };
    Json j;
    j["tag"] = p.tag;
    j["cap_kg"] = num(p.cap_kg);
    j["ub_cost"] = num(p.ub_cost);
    j["lb_cost"] = num(p.lb_cost);
    j["emission_kg"] = num(p.emission_kg);
    j["gap_pct"] = num(p.gap_pct);
    j["valid"] = p.valid;
    j["stock_residual_pu"] = p.stock_residual;
    j["messages"] = p.messages;
    return j;
}

void check_stock(const ParetoPoint& p, std::vector<Diagnostic>& warnings) {
    if (p.stock_residual > 1e-6) {
        warnings.push_back({"stock conservation", p.tag + " point leaves a net stock change of " +
                                                      text::format_double(p.stock_residual, 3) +
                                                      " p.u."});
    }
}

double gasoline_kg(const RunConfig& c, const FleetModel& fleet) {
    return c.gasoline_g_per_mile ? gasoline_emission_kg(*c.gasoline_g_per_mile, fleet.total_miles)
                                 : 0.0;
}

struct Manifest {
    Json json;
    Stopwatch clock;
    Json timings = Json::object();

    Manifest(const std::string& command, const RunConfig& c) {
        json["tool"] = "evmopf";
        json["version"] = kVersion;
        json["command"] = command;
        json["config"] = config_json(c);
    }
    void time(const std::string& phase) { timings[phase] = clock.lap(); }
    void write(const RunConfig& c) {
        json["timings_s"] = timings;
        write_text(c.output_dir / "manifest.json", json.dump(2) + "\n");
    }
};

int cmd_inspect(const std::string& path, std::ostream& out, std::ostream& err) {
    Network net;
    try {
        net = parse_case_file(path);
    } catch (const std::exception& e) {
        err << "error: " << path << ": " << e.what() << '\n';
        return kExitInput;
    }
    out << "buses=" << net.buses.size() << " lines=" << net.lines.size()
        << " gens=" << net.generators.size() << '\n';
    out << "load_p_mw=" << text::format_double(net.total_load_p() * net.base_mva, 9)
        << " load_q_mvar=" << text::format_double(net.total_load_q() * net.base_mva, 9) << '\n';
    out << "load_buses=" << net.load_buses().size() << '\n';
    const auto diags = validate(net);
    print_diagnostics(out, "diagnostic", diags);
    return diags.empty() ? kExitOk : kExitInput;
}

int cmd_profiles(const RunConfig& c, std::ostream& out) {
    check_config(c, false, false);
    auto run = prepare_run(c);
    fs::create_directories(c.output_dir);
    const auto& net = run.instance.network;
    std::ostringstream shapes;
    shapes << "period";
    for (const auto& p : run.profiles) {
        shapes << ',' << p.season;
    }
    shapes << '\n';
    for (std::size_t t = 0; t < run.instance.horizon(); ++t) {
        shapes << t;
        for (const auto& p : run.profiles) {
            shapes << ',' << text::format_double(p.values[t], 12);
        }
        shapes << '\n';
    }
    write_text(c.output_dir / "profiles.csv", shapes.str());
    std::ostringstream groups;
    groups << "bus,period,energy_kwh,charge_max_kw,discharge_max_kw,stock_min_kwh,stock_max_kwh\n";
    for (const auto& g : run.fleet.groups) {
        for (std::size_t t = 0; t < g.horizon(); ++t) {
            groups << net.buses[g.bus].id << ',' << t << ',' << text::format_double(g.energy[t], 12)
                   << ',' << text::format_double(g.charge_max[t], 12) << ','
                   << text::format_double(g.discharge_max[t], 12) << ','
                   << text::format_double(g.stock_min[t], 12) << ','
                   << text::format_double(g.stock_max[t], 12) << '\n';
        }
    }
    write_text(c.output_dir / "fleet.csv", groups.str());
    write_text(c.output_dir / "fleet.txt", dump_fleet(net, run.fleet));
    out << "weight=" << text::format_double(run.weight, 6) << '\n';
    out << "ev_energy_kwh=" << text::format_double(run.fleet.total_energy(), 9) << '\n';
    out << "miles=" << text::format_double(run.fleet.total_miles, 9) << '\n';
    print_diagnostics(out, "warning", run.fleet.warnings);
    return kExitOk;
}

int cmd_solve(const RunConfig& c, const std::string& objective, std::optional<double> cap,
              const std::string& export_path, std::ostream& out, std::ostream& err) {
    check_config(c, objective == "emission" || cap.has_value(), false);
    Manifest manifest("solve", c);
    auto run = prepare_run(c);
    auto& inst = run.instance;
    manifest.time("prepare");
    const auto opts = solve_options(c);
    fs::create_directories(c.output_dir);
    double no_ev_cost = 0.0;
    if (inst.has_emissions()) {
        const auto base = baseline_generation(inst, opts);
        if (!base.valid) {
            err << "error: baseline generation failed\n";
            return kExitSolver;
        }
        store_baseline(inst, base);
        no_ev_cost = base.cost;
        manifest.time("baseline");
    }
    inst.objective = objective == "emission" ? Objective::emission : Objective::cost;
    inst.emission_cap_kg = cap;
    const auto relax = solve_relaxation(inst, opts.conic);
    manifest.time("relaxation");
    if (!export_path.empty()) {
        write_text(export_path, export_conic_program(relax.model.program));
    }
    out << "relaxation=" << to_string(relax.solution.status)
        << " iterations=" << relax.solution.iterations
        << " objective=" << text::format_double(relax.solution.objective, 12) << '\n';
    if (!relax.ok()) {
        err << "error: relaxation " << to_string(relax.solution.status) << ": "
            << relax.solution.message << '\n';
        return kExitSolver;
    }
    ParetoPoint p;
    p.tag = "solve";
    p.cap_kg = cap.value_or(std::nan(""));
    p.charge = relax.point.a;
    p.discharge = relax.point.b;
    p.stock_residual = stock_conservation_residual(inst, p.charge, p.discharge);
    const auto eval = evaluate_schedule(inst, p.charge, p.discharge, &relax.point, opts.local,
                                        opts.threads);
    manifest.time("local");
    p.ub_cost = eval.cost;
    p.emission_kg = inst.has_emissions() ? eval.emission_kg : std::nan("");
    p.period_cost = eval.period_cost;
    p.period_emission_kg = eval.period_emission_kg;
    p.generation = eval.generation;
    p.lb_cost = inst.objective == Objective::cost ? relax.solution.certified_bound : std::nan("");
    p.gap_pct = std::isnan(p.lb_cost) ? std::nan("") : 100.0 * (1.0 - p.lb_cost / p.ub_cost);
    p.valid = eval.valid;
    for (const auto& f : eval.failures) {
        p.messages.push_back(f.code + ": " + f.message);
    }
    write_text(c.output_dir / "solve.csv",
               frontier_csv({p}, no_ev_cost, gasoline_kg(c, run.fleet)));
    write_text(c.output_dir / "hourly_solve.csv", hourly_csv(inst, p));
    manifest.json["result"] = point_json(p);
    manifest.write(c);
    out << "ub_cost=" << text::format_double(p.ub_cost, 12)
        << " lb_cost=" << text::format_double(p.lb_cost, 12)
        << " gap_pct=" << text::format_double(p.gap_pct, 6) << '\n';
    print_diagnostics(err, "warning", run.fleet.warnings);
    print_diagnostics(err, "failure", eval.failures);
    return p.valid ? kExitOk : kExitSolver;
}

int cmd_benchmark(const RunConfig& c, std::ostream& out, std::ostream& err) {
    check_config(c, true, true);
    Manifest manifest("benchmark", c);
    auto run = prepare_run(c);
    auto& inst = run.instance;
    manifest.time("prepare");
    const auto opts = solve_options(c);
    fs::create_directories(c.output_dir);
    const auto base = baseline_generation(inst, opts);
    if (!base.valid) {
        err << "error: baseline generation failed\n";
        return kExitSolver;
    }
    store_baseline(inst, base);
    manifest.time("baseline");
    const SocpPoint* warm = base.relaxation.ok() ? &base.relaxation.point : nullptr;
    const auto p = evaluate_benchmark(inst, opts, warm);
    manifest.time("benchmark");
    write_text(c.output_dir / "benchmark.csv",
               frontier_csv({p}, base.cost, gasoline_kg(c, run.fleet)));
    write_text(c.output_dir / "hourly_benchmark.csv", hourly_csv(inst, p));
    manifest.json["no_ev_cost"] = base.cost;
    manifest.json["result"] = point_json(p);
    manifest.write(c);
    out << "ub_cost=" << text::format_double(p.ub_cost, 12)
        << " emission_kg=" << text::format_double(p.emission_kg, 12)
        << " valid=" << (p.valid ? "true" : "false") << '\n';
    for (const auto& m : p.messages) {
        err << "issue: " << m << '\n';
    }
    return p.valid ? kExitOk : kExitSolver;
}

int cmd_pareto(const RunConfig& c, std::ostream& out, std::ostream& err) {
    check_config(c, true, true);
    Manifest manifest("pareto", c);
    auto run = prepare_run(c);
    manifest.time("prepare");
    fs::create_directories(c.output_dir);
    ParetoOptions opts;
    opts.points = c.points;
    opts.include_benchmark = c.benchmark;
    opts.solve = solve_options(c);
    ParetoRun result;
    try {
        result = run_pareto(run.instance, opts);
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitSolver;
    }
    manifest.time("sweep");
    auto rows = result.points;
    if (result.benchmark) {
        rows.push_back(*result.benchmark);
    }
    std::vector<Diagnostic> warnings = run.fleet.warnings;
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    const double gas = gasoline_kg(c, run.fleet);
    write_text(c.output_dir / "frontier.csv", frontier_csv(rows, result.baseline.cost, gas));
    Json points = Json::array();
    for (std::size_t k = 0; k < result.points.size(); ++k) {
        const auto& p = result.points[k];
        check_stock(p, warnings);
        std::string name = std::to_string(k);
        name = "hourly_point_" + std::string(name.size() < 2 ? 2 - name.size() : 0, '0') + name + ".csv";
        write_text(c.output_dir / name, hourly_csv(run.instance, p));
        points.push_back(point_json(p));
    }
    if (result.benchmark) {
        write_text(c.output_dir / "hourly_benchmark.csv", hourly_csv(run.instance, *result.benchmark));
        manifest.json["benchmark"] = point_json(*result.benchmark);
    }
    manifest.json["no_ev_cost"] = result.baseline.cost;
    manifest.json["gasoline_kg"] = gas;
    manifest.json["lbe_kg"] = result.bounds.lbe;
    manifest.json["ube_kg"] = result.bounds.ube;
    manifest.json["weight"] = run.weight;
    manifest.json["points"] = points;
    Json warn = Json::array();
    for (const auto& w : warnings) {
        warn.push_back(w.code + ": " + w.message);
    }
    manifest.json["warnings"] = warn;
    manifest.write(c);
    std::size_t valid = 0;
    for (const auto& p : result.points) {
        valid += p.valid ? 1 : 0;
    }
    out << "points=" << result.points.size() << " valid=" << valid
        << " lbe_kg=" << text::format_double(result.bounds.lbe, 9)
        << " ube_kg=" << text::format_double(result.bounds.ube, 9) << '\n';
    print_diagnostics(err, "warning", warnings);
    return valid > 0 ? kExitOk : kExitSolver;
}

}  // namespace

RunConfig load_config(const fs::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw InputError("cannot open config " + path.string());
    } catch (const YAML::Exception& e) {
        throw InputError("config " + path.string() + ": " + e.what());
    }
    if (root["config"] && root["tool"]) {
        root = root["config"];
    }
    if (!root.IsMap()) {
        throw InputError("config " + path.string() + " is not a key-value map");
    }
    const fs::path base = fs::absolute(path).parent_path();
    RunConfig c;
    reject_unknown(root, "", {"case", "demand", "emission", "trips", "ev", "sweep", "solver", "output"});
    read_path(root, "case", c.case_path, base, "");
    read_path(root, "emission", c.emission_path, base, "");
    read_path(root, "trips", c.trips_path, base, "");
    read_path(root, "output", c.output_dir, base, "");
    if (const auto d = root["demand"]) {
        reject_unknown(d, "demand.", {"summer", "winter", "season"});
        read_path(d, "summer", c.summer_demand, base, "demand.");
        read_path(d, "winter", c.winter_demand, base, "demand.");
        read_value(d, "season", c.season, "demand.");
    }
    if (const auto e = root["ev"]) {
        reject_unknown(e, "ev.", {"enabled", "v2g", "kwh_per_mile", "charger_kw", "usable_kwh",
                                  "efficiency", "weight"});
        read_value(e, "enabled", c.ev, "ev.");
        read_value(e, "v2g", c.v2g, "ev.");
        read_value(e, "kwh_per_mile", c.kwh_per_mile, "ev.");
        read_value(e, "charger_kw", c.charging.charger_kw, "ev.");
        read_value(e, "usable_kwh", c.charging.usable_kwh, "ev.");
        read_value(e, "efficiency", c.charging.efficiency, "ev.");
        read_optional(e, "weight", c.weight, "ev.");
    }
    if (const auto s = root["sweep"]) {
        reject_unknown(s, "sweep.", {"points", "benchmark", "gasoline_g_per_mile"});
        read_value(s, "points", c.points, "sweep.");
        read_value(s, "benchmark", c.benchmark, "sweep.");
        read_optional(s, "gasoline_g_per_mile", c.gasoline_g_per_mile, "sweep.");
    }
    if (const auto s = root["solver"]) {
        reject_unknown(s, "solver.", {"threads", "conic_tol", "nlp_tol"});
        read_value(s, "threads", c.threads, "solver.");
        read_value(s, "conic_tol", c.conic_tol, "solver.");
        read_value(s, "nlp_tol", c.nlp_tol, "solver.");
    }
    return c;
}

void check_config(const RunConfig& c, bool needs_emission, bool needs_gasoline) {
    const auto require_file = [](const fs::path& p, const std::string& what) {
        if (p.empty()) {
            throw InputError(what + " is not set");
        }
        if (!fs::is_regular_file(p)) {
            throw InputError(what + " " + p.string() + " does not exist");
        }
    };
    require_file(c.case_path, "case file");
    require_file(c.summer_demand, "summer demand file");
    if (!c.winter_demand.empty()) {
        require_file(c.winter_demand, "winter demand file");
    }
    if (c.season != "summer" && c.season != "winter") {
        throw InputError("season must be summer or winter");
    }
    if (c.season == "winter" && c.winter_demand.empty()) {
        throw InputError("season winter needs a winter demand file");
    }
    if (needs_emission || !c.emission_path.empty()) {
        require_file(c.emission_path, "emission file");
    }
    if (c.ev) {
        require_file(c.trips_path, "trip file");
    }
    if (c.points < 2) {
        throw InputError("sweep points must be at least 2");
    }
    if (c.threads < 1) {
        throw InputError("threads must be at least 1");
    }
    if (!(c.conic_tol > 0.0) || !(c.nlp_tol > 0.0)) {
        throw InputError("tolerances must be positive");
    }
    if (!(c.kwh_per_mile > 0.0) || !(c.charging.usable_kwh > 0.0) ||
        !(c.charging.charger_kw >= 0.0) || !(c.charging.efficiency > 0.0) ||
        c.charging.efficiency > 1.0) {
        throw InputError("EV parameters must be positive with efficiency in (0, 1]");
    }
    if (c.weight && !(*c.weight > 0.0)) {
        throw InputError("weight must be positive");
    }
    if (needs_gasoline && !(c.gasoline_g_per_mile && *c.gasoline_g_per_mile > 0.0)) {
        throw InputError("sweep.gasoline_g_per_mile must be set to a positive value");
    }
}

PreparedRun prepare_run(const RunConfig& c) {
    PreparedRun run;
    Network net;
    try {
        net = parse_case_file(c.case_path);
    } catch (const std::exception& e) {
        throw InputError(c.case_path.string() + ": " + e.what());
    }
    std::vector<RawSeason> raw{{"summer", read_series(c.summer_demand)}};
    if (!c.winter_demand.empty()) {
        raw.push_back({"winter", read_series(c.winter_demand)});
    }
    try {
        run.profiles = normalize_profiles(raw);
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("demand profiles: ") + e.what());
    }
    const auto& shape = c.season == "winter" ? run.profiles.at(1) : run.profiles.at(0);
    const auto loads = scale_loads(net, shape);
    const std::size_t T = loads.horizon();
    std::vector<double> emission;
    if (!c.emission_path.empty()) {
        emission = read_series(c.emission_path);
        if (emission.size() != T) {
            throw InputError("emission series has " + std::to_string(emission.size()) +
                             " periods, demand has " + std::to_string(T));
        }
    }
    const double grid_kwh = pu_to_kwh(loads.total_p(), net.base_mva);
    run.weight = c.weight.value_or(compute_weight(
        grid_kwh, sum(raw[0].kwh), raw.size() > 1 ? sum(raw[1].kwh) : 0.0));
    if (c.ev) {
        std::vector<TripRecord> trips;
        try {
            trips = read_trips_csv(c.trips_path, T);
        } catch (const std::exception& e) {
            throw InputError(c.trips_path.string() + ": " + e.what());
        }
        trips = filter_trips(trips, passenger_vehicle_types(), c.charging.usable_kwh,
                             c.kwh_per_mile);
        const auto vehicles = vehicles_of(trips);
        const auto energy =
            energy_matrix(duration_matrix(trips, T), trips, c.kwh_per_mile, vehicles);
        run.fleet = build_fleet(net, energy, trips, run.weight, c.charging);
    } else {
        run.fleet = empty_fleet(net, T);
    }
    InstanceOptions opts;
    opts.ev_enabled = c.ev;
    opts.v2g_enabled = c.v2g;
    try {
        run.instance = assemble_instance(net, loads, run.fleet, emission, opts);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    return run;
}

SolveOptions solve_options(const RunConfig& c) {
    SolveOptions o;
    o.conic.tol_rel = c.conic_tol;
    o.conic.tol_abs = c.conic_tol;
    o.conic.tol_feas = c.conic_tol;
    o.local.nlp.grad_tol = c.nlp_tol;
    o.threads = c.threads;
    return o;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"EV-aware multi-period AC optimal power flow"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "summarize and validate a case file");
    inspect->add_option("case", inspect_path, "MATPOWER case file")->required();

    Overrides profiles_o, solve_o, bench_o, pareto_o;
    auto* profiles = app.add_subcommand("profiles", "synthesize EV charging parameters");
    add_overrides(profiles, profiles_o);

    auto* solve = app.add_subcommand("solve", "relaxation plus per-period AC recovery");
    add_overrides(solve, solve_o);
    std::string objective = "cost";
    std::optional<double> cap;
    std::string export_path;
    solve->add_option("--objective", objective, "cost or emission")
        ->check(CLI::IsMember({"cost", "emission"}));
    solve->add_option("--cap", cap, "emission cap in kg");
    solve->add_option("--export-conic", export_path, "write the relaxation in text form");

    auto* bench = app.add_subcommand("benchmark", "evaluate midnight charging");
    add_overrides(bench, bench_o);
    auto* pareto = app.add_subcommand("pareto", "sweep emission caps");
    add_overrides(pareto, pareto_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }
    try {
        if (inspect->parsed()) {
            return cmd_inspect(inspect_path, out, err);
        }
        if (profiles->parsed()) {
            return cmd_profiles(resolve_config(profiles_o), out);
        }
        if (solve->parsed()) {
            return cmd_solve(resolve_config(solve_o), objective, cap, export_path, out, err);
        }
        if (bench->parsed()) {
            return cmd_benchmark(resolve_config(bench_o), out, err);
        }
        return cmd_pareto(resolve_config(pareto_o), out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitSolver;
    }
}

}  // namespace evmopf
