#include "evmopf/fleet.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evmopf/text_util.hpp"

namespace evmopf {

const std::vector<std::string>& passenger_vehicle_types() {
    static const std::vector<std::string> types{"car", "suv", "van", "pickup truck"};
    return types;
}

std::vector<TripRecord> filter_trips(const std::vector<TripRecord>& trips,
                                     const std::vector<std::string>& vehicle_types,
                                     double battery_kwh, double kwh_per_mile) {
    if (!(kwh_per_mile > 0.0)) {
        throw std::invalid_argument("energy use per mile must be positive");
    }
    std::vector<std::string> allowed;
    allowed.reserve(vehicle_types.size());
    for (const auto& t : vehicle_types) {
        allowed.push_back(text::to_lower(text::trim(t)));
    }
    const double range = battery_kwh / kwh_per_mile;
    std::vector<TripRecord> kept;
    for (const auto& trip : trips) {
        if (!trip.household) {
            continue;
        }
        const auto type = text::to_lower(text::trim(trip.vehicle_type));
        if (std::find(allowed.begin(), allowed.end(), type) == allowed.end()) {
            continue;
        }
        if (trip.miles >= range) {
            continue;
        }
        kept.push_back(trip);
    }
    return kept;
}

std::vector<Vehicle> vehicles_of(const std::vector<TripRecord>& trips) {
    std::map<std::string, double> weights;
    for (const auto& trip : trips) {
        auto [it, inserted] = weights.emplace(trip.vehicle_id, trip.weight);
        if (!inserted && it->second != trip.weight) {
            throw std::invalid_argument("vehicle '" + trip.vehicle_id +
                                        "' has trips with different weights");
        }
    }
    std::vector<Vehicle> out;
    out.reserve(weights.size());
    for (const auto& [id, w] : weights) {
        out.push_back({id, w});
    }
    return out;
}

Eigen::MatrixXd duration_matrix(const std::vector<TripRecord>& trips, std::size_t horizon) {
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trips.size()),
                                                  static_cast<Eigen::Index>(horizon));
    for (std::size_t r = 0; r < trips.size(); ++r) {
        const auto& trip = trips[r];
        for (std::size_t t = 0; t < horizon; ++t) {
            const double lo = std::max(static_cast<double>(t), trip.start_hr);
            const double hi = std::min(static_cast<double>(t + 1), trip.end_hr);
            delta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) =
                std::clamp(hi - lo, 0.0, 1.0);
        }
    }
    return delta;
}

double EnergyMatrix::weighted_demand(std::size_t v) const {
    return vehicles[v].weight * omega.row(static_cast<Eigen::Index>(v)).sum();
}

EnergyMatrix energy_matrix(const Eigen::MatrixXd& duration, const std::vector<TripRecord>& trips,
                           double kwh_per_mile, const std::vector<Vehicle>& vehicles) {
    if (duration.rows() != static_cast<Eigen::Index>(trips.size())) {
        throw std::invalid_argument("duration matrix rows do not match the trip count");
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t v = 0; v < vehicles.size(); ++v) {
        index.emplace(vehicles[v].id, v);
    }
    EnergyMatrix out;
    out.vehicles = vehicles;
    out.duration = duration;
    out.omega = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vehicles.size()), duration.cols());
    out.avg_speed.reserve(trips.size());
    for (std::size_t r = 0; r < trips.size(); ++r) {
        const auto& trip = trips[r];
        const double hours = trip.end_hr - trip.start_hr;
        if (!(hours > 0.0)) {
            throw std::invalid_argument("trip '" + trip.trip_id + "' has zero duration");
        }
        const auto it = index.find(trip.vehicle_id);
        if (it == index.end()) {
            throw std::invalid_argument("trip '" + trip.trip_id + "' refers to unknown vehicle '" +
                                        trip.vehicle_id + "'");
        }
        const double speed = trip.miles / hours;
        out.avg_speed.push_back(speed);
        out.omega.row(static_cast<Eigen::Index>(it->second)) +=
            speed * kwh_per_mile * duration.row(static_cast<Eigen::Index>(r));
    }
    return out;
}

double VehicleGroup::total() const {
    return std::accumulate(weighted_energy.begin(), weighted_energy.end(), 0.0);
}

std::vector<double> VehicleGroup::average_profile() const {
    std::vector<double> out(weighted_energy.size(), 0.0);
    if (vehicle_weight > 0.0) {
        for (std::size_t t = 0; t < out.size(); ++t) {
            out[t] = weighted_energy[t] / vehicle_weight;
        }
    }
    return out;
}

std::vector<VehicleGroup> form_groups(const EnergyMatrix& energy, std::size_t n_groups) {
    const std::size_t horizon = energy.horizon();
    std::vector<VehicleGroup> groups(n_groups);
    for (auto& g : groups) {
        g.weighted_energy.assign(horizon, 0.0);
    }
    if (n_groups == 0) {
        return groups;
    }
    std::vector<std::size_t> order(energy.vehicles.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> demand(order.size());
    for (std::size_t v = 0; v < order.size(); ++v) {
        demand[v] = energy.weighted_demand(v);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (demand[a] != demand[b]) {
            return demand[a] > demand[b];
        }
        return energy.vehicles[a].id < energy.vehicles[b].id;
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t v = order[k];
        auto& g = groups[k % n_groups];
        const double w = energy.vehicles[v].weight;
        g.members.push_back(v);
        g.vehicle_weight += w;
        for (std::size_t t = 0; t < horizon; ++t) {
            g.weighted_energy[t] +=
                w * energy.omega(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(t));
        }
    }
    return groups;
}

std::vector<GroupAssignment> assign_groups(const Network& network,
                                           const std::vector<VehicleGroup>& groups) {
    auto buses = network.load_buses();
    if (buses.size() != groups.size()) {
        throw std::invalid_argument("group count " + std::to_string(groups.size()) +
                                    " differs from load bus count " +
                                    std::to_string(buses.size()));
    }
    std::sort(buses.begin(), buses.end(), [&](std::size_t a, std::size_t b) {
        const auto& ba = network.buses[a];
        const auto& bb = network.buses[b];
        if (ba.pd != bb.pd) {
            return ba.pd > bb.pd;
        }
        return ba.id < bb.id;
    });
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> totals(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        totals[g] = groups[g].total();
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (totals[a] != totals[b]) {
            return totals[a] > totals[b];
        }
        const auto& ga = groups[a];
        const auto& gb = groups[b];
        if (ga.vehicle_weight != gb.vehicle_weight) {
            return ga.vehicle_weight > gb.vehicle_weight;
        }
        return std::lexicographical_compare(gb.weighted_energy.begin(), gb.weighted_energy.end(),
                                            ga.weighted_energy.begin(), ga.weighted_energy.end());
    });
    std::vector<GroupAssignment> out;
    out.reserve(buses.size());
    for (std::size_t k = 0; k < buses.size(); ++k) {
        out.push_back({buses[k], order[k]});
    }
    std::sort(out.begin(), out.end(),
              [](const GroupAssignment& a, const GroupAssignment& b) { return a.bus < b.bus; });
    return out;
}

double FleetGroup::total_energy() const {
    return std::accumulate(energy.begin(), energy.end(), 0.0);
}

FleetGroup derive_charging_params(const std::vector<double>& omega_row, double vehicle_weight,
                                  double weight, const ChargingSpec& spec,
                                  std::vector<Diagnostic>* warnings) {
    if (!(weight > 0.0)) {
        throw std::invalid_argument("weight must be positive");
    }
    if (!(spec.efficiency > 0.0 && spec.efficiency <= 1.0)) {
        throw std::invalid_argument("charging efficiency must lie in (0, 1]");
    }
    const std::size_t horizon = omega_row.size();
    const double scale = weight * vehicle_weight;
    FleetGroup g;
    g.efficiency = spec.efficiency;
    g.initial = 0.0;
    g.energy.resize(horizon);
    g.charge_max.resize(horizon);
    g.discharge_max.resize(horizon);
    g.stock_min.assign(horizon, 0.0);
    g.stock_max.assign(horizon, scale * spec.usable_kwh);
    for (std::size_t t = 0; t < horizon; ++t) {
        const double c = scale * omega_row[t];
        g.energy[t] = c;
        const double rate = c > 0.0 ? 0.0 : scale * spec.charger_kw;
        g.charge_max[t] = rate;
        g.discharge_max[t] = rate;
    }
    std::size_t t = horizon;
    while (t > 0) {
        --t;
        if (!(g.energy[t] > 0.0)) {
            continue;
        }
        std::size_t start = t;
        while (start > 0 && g.energy[start - 1] > 0.0) {
            --start;
        }
        double remaining = 0.0;
        bool clamped = false;
        for (std::size_t k = t + 1; k-- > start;) {
            remaining += g.energy[k];
            if (remaining > g.stock_max[k]) {
                clamped = true;
            }
            g.stock_min[k] = std::min(remaining, g.stock_max[k]);
        }
        if (clamped && warnings) {
            warnings->push_back({"block demand",
                                 "driving block in periods " + std::to_string(start) + ".." +
                                     std::to_string(t) + " needs " +
                                     text::format_double(remaining, 6) +
                                     " kWh, more than the usable capacity " +
                                     text::format_double(g.stock_max[start], 6) + " kWh"});
        }
        t = start;
    }
    if (horizon > 0 && g.stock_min[0] > g.initial && warnings) {
        warnings->push_back({"initial charge",
                             "driving in period 0 needs " + text::format_double(g.stock_min[0], 6) +
                                 " kWh but the initial charge is " +
                                 text::format_double(g.initial, 6) + " kWh"});
    }
    return g;
}

FleetGroup empty_fleet_group(std::size_t bus, std::size_t horizon, double efficiency) {
    FleetGroup g;
    g.bus = bus;
    g.efficiency = efficiency;
    g.energy.assign(horizon, 0.0);
    g.charge_max.assign(horizon, 0.0);
    g.discharge_max.assign(horizon, 0.0);
    g.stock_min.assign(horizon, 0.0);
    g.stock_max.assign(horizon, 0.0);
    return g;
}

double FleetModel::total_energy() const {
    double sum = 0.0;
    for (const auto& g : groups) {
        sum += g.total_energy();
    }
    return sum;
}

FleetModel build_fleet(const Network& network, const EnergyMatrix& energy,
                       const std::vector<TripRecord>& trips, double weight,
                       const ChargingSpec& spec) {
    FleetModel fleet;
    fleet.horizon = energy.horizon();
    for (std::size_t i = 0; i < network.buses.size(); ++i) {
        fleet.groups.push_back(empty_fleet_group(i, fleet.horizon, spec.efficiency));
    }
    const auto load = network.load_buses();
    const auto groups = form_groups(energy, load.size());
    for (const auto& a : assign_groups(network, groups)) {
        const auto& vg = groups[a.group];
        std::vector<Diagnostic> local;
        auto g = derive_charging_params(vg.average_profile(), vg.vehicle_weight, weight, spec,
                                        &local);
        g.bus = a.bus;
        for (auto& d : local) {
            d.message = "bus " + std::to_string(network.buses[a.bus].id) + ": " + d.message;
            fleet.warnings.push_back(std::move(d));
        }
        fleet.groups[a.bus] = std::move(g);
    }
    double miles = 0.0;
    for (const auto& trip : trips) {
        miles += trip.weight * trip.miles;
    }
    fleet.total_miles = weight * miles;
    return fleet;
}

namespace {

bool parse_flag(const std::string& token, bool& value) {
    const auto lower = text::to_lower(token);
    if (lower == "1" || lower == "true" || lower == "yes" || lower == "y") {
        value = true;
        return true;
    }
    if (lower == "0" || lower == "false" || lower == "no" || lower == "n") {
        value = false;
        return true;
    }
    return false;
}

}  // namespace

std::vector<TripRecord> parse_trips_csv(const std::string& text, std::size_t horizon) {
    static const std::vector<std::string> kHeader{"vehicle_id", "trip_id",  "start_hr",
                                                  "end_hr",     "miles",    "weight",
                                                  "vehicle_type", "household_flag"};
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<TripRecord> trips;
    const auto fail = [&](const std::string& what) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = text::trim(line);
        if (trimmed.empty()) {
            continue;
        }
        auto fields = text::split(trimmed, ',');
        if (!header_seen) {
            header_seen = true;
            for (auto& f : fields) {
                f = text::to_lower(f);
            }
            if (fields != kHeader) {
                fail("trip CSV header must be "
                     "'vehicle_id,trip_id,start_hr,end_hr,miles,weight,vehicle_type,household_flag'");
            }
            continue;
        }
        if (fields.size() != kHeader.size()) {
            fail("expected " + std::to_string(kHeader.size()) + " columns, got " +
                 std::to_string(fields.size()));
        }
        TripRecord r;
        r.vehicle_id = fields[0];
        r.trip_id = fields[1];
        const auto s = text::parse_double(fields[2]);
        const auto e = text::parse_double(fields[3]);
        const auto d = text::parse_double(fields[4]);
        const auto w = text::parse_double(fields[5]);
        if (!s || !e || !d || !w) {
            fail("bad number");
        }
        r.start_hr = *s;
        r.end_hr = *e;
        r.miles = *d;
        r.weight = *w;
        r.vehicle_type = fields[6];
        if (!parse_flag(fields[7], r.household)) {
            fail("bad household flag '" + fields[7] + "'");
        }
        if (r.vehicle_id.empty()) {
            fail("empty vehicle id");
        }
        if (!(r.start_hr >= 0.0 && r.start_hr < r.end_hr &&
              r.end_hr <= static_cast<double>(horizon))) {
            fail("trip times must satisfy 0 <= start < end <= " + std::to_string(horizon));
        }
        if (!(r.miles > 0.0)) {
            fail("trip distance must be positive");
        }
        if (!(r.weight > 0.0)) {
            fail("vehicle weight must be positive");
        }
        trips.push_back(std::move(r));
    }
    if (!header_seen) {
        throw std::invalid_argument("trip CSV is empty");
    }
    return trips;
}

std::vector<TripRecord> read_trips_csv(const std::filesystem::path& path, std::size_t horizon) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_trips_csv(ss.str(), horizon);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::string dump_fleet(const Network& network, const FleetModel& fleet) {
    std::ostringstream out;
    const auto num = [](double v) { return text::format_double(v, 12); };
    const auto series = [&](const char* key, const std::vector<double>& values) {
        out << "  " << key;
        for (double v : values) {
            out << ' ' << num(v);
        }
        out << '\n';
    };
    out << "fleet horizon=" << fleet.horizon << " groups=" << fleet.groups.size()
        << " total_energy_kwh=" << num(fleet.total_energy())
        << " total_miles=" << num(fleet.total_miles) << '\n';
    for (const auto& g : fleet.groups) {
        out << "group bus=" << network.buses.at(g.bus).id << " efficiency=" << num(g.efficiency)
            << " initial=" << num(g.initial) << '\n';
        series("energy", g.energy);
        series("charge_max", g.charge_max);
        series("discharge_max", g.discharge_max);
        series("stock_min", g.stock_min);
        series("stock_max", g.stock_max);
    }
    for (const auto& w : fleet.warnings) {
        out << "warning " << w.code << ": " << w.message << '\n';
    }
    return out.str();
}

}  // namespace evmopf
