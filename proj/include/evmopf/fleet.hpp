#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evmopf/network.hpp"

namespace evmopf {

struct TripRecord {
    std::string vehicle_id;
    std::string trip_id;
    double start_hr = 0.0;
    double end_hr = 0.0;
    double miles = 0.0;
    double weight = 1.0;  ///< survey weighting factor of the vehicle
    std::string vehicle_type;
    bool household = true;
};

struct Vehicle {
    std::string id;
    double weight = 1.0;
};

/// Vehicle types kept by filter_trips unless the caller supplies its own list.
const std::vector<std::string>& passenger_vehicle_types();

/// Keeps household passenger-vehicle trips shorter than battery_kwh / kwh_per_mile.
/// Type matching is case-insensitive.
std::vector<TripRecord> filter_trips(const std::vector<TripRecord>& trips,
                                     const std::vector<std::string>& vehicle_types,
                                     double battery_kwh, double kwh_per_mile);

/// Distinct vehicles of a trip list sorted by id. Throws if one vehicle carries two weights.
std::vector<Vehicle> vehicles_of(const std::vector<TripRecord>& trips);

/// Hours of overlap between each trip and each one-hour period [t, t+1), trips x periods.
Eigen::MatrixXd duration_matrix(const std::vector<TripRecord>& trips, std::size_t horizon);

struct EnergyMatrix {
    std::vector<Vehicle> vehicles;
    Eigen::MatrixXd omega;          ///< kWh, vehicles x periods
    Eigen::MatrixXd duration;       ///< hours, trips x periods
    std::vector<double> avg_speed;  ///< mph, per trip

    std::size_t horizon() const { return static_cast<std::size_t>(omega.cols()); }
    /// sum_t w_v * omega_vt
    double weighted_demand(std::size_t v) const;
};

/// omega_vt = sum over the vehicle's trips of avg_speed * duration * kwh_per_mile.
/// Vehicles without trips get a zero row. Throws on zero-duration trips or trips of
/// vehicles missing from `vehicles`.
EnergyMatrix energy_matrix(const Eigen::MatrixXd& duration, const std::vector<TripRecord>& trips,
                           double kwh_per_mile, const std::vector<Vehicle>& vehicles);

struct VehicleGroup {
    std::vector<std::size_t> members;    ///< indices into EnergyMatrix::vehicles
    double vehicle_weight = 0.0;         ///< sum of member weights
    std::vector<double> weighted_energy; ///< kWh per period, sum_v w_v omega_vt

    double total() const;
    /// Weighted-average per-vehicle profile; zero for an empty group.
    std::vector<double> average_profile() const;
};

/// Round-robin partition over vehicles sorted by weighted demand (descending, ties by id).
std::vector<VehicleGroup> form_groups(const EnergyMatrix& energy, std::size_t n_groups);

struct GroupAssignment {
    std::size_t bus = 0;    ///< internal bus index
    std::size_t group = 0;  ///< index into the group list
};

/// Pairs load buses sorted by real load (descending, ties by ascending bus id) with groups
/// sorted by total weighted demand (descending, ties by profile content). Throws when the
/// group count differs from the number of load buses. Output is ordered by bus.
std::vector<GroupAssignment> assign_groups(const Network& network,
                                           const std::vector<VehicleGroup>& groups);

struct ChargingSpec {
    double charger_kw = 6.6;
    double usable_kwh = 32.0;
    double efficiency = 0.9;
};

/// Aggregated EV parameters of one bus in kWh / kW.
struct FleetGroup {
    std::size_t bus = 0;
    std::vector<double> energy;         ///< c_t
    std::vector<double> charge_max;     ///< a_bar_t
    std::vector<double> discharge_max;  ///< b_bar_t
    std::vector<double> stock_min;      ///< s_min_t, charge required at the start of period t
    std::vector<double> stock_max;      ///< s_max_t
    double efficiency = 0.9;
    double initial = 0.0;

    std::size_t horizon() const { return energy.size(); }
    double total_energy() const;
};

/// Derives c, a_bar, b_bar, s_min, s_max for one group from its per-vehicle profile,
/// summed vehicle weight and the demand-consistency weight. Warnings are appended when a
/// driving block needs more than the usable capacity, or when driving in period 0 makes
/// the zero initial charge infeasible.
FleetGroup derive_charging_params(const std::vector<double>& omega_row, double vehicle_weight,
                                  double weight, const ChargingSpec& spec,
                                  std::vector<Diagnostic>* warnings = nullptr);

/// All-zero group for buses without real load.
FleetGroup empty_fleet_group(std::size_t bus, std::size_t horizon, double efficiency);

struct FleetModel {
    std::size_t horizon = 0;
    std::vector<FleetGroup> groups;  ///< one per bus, indexed by bus
    std::vector<Diagnostic> warnings;
    double total_miles = 0.0;        ///< weight * sum_v w_v * miles, the distance served

    double total_energy() const;
};

/// Groups vehicles, assigns them to load buses and derives every bus's parameters.
FleetModel build_fleet(const Network& network, const EnergyMatrix& energy,
                       const std::vector<TripRecord>& trips, double weight,
                       const ChargingSpec& spec);

/// Trip CSV: vehicle_id,trip_id,start_hr,end_hr,miles,weight,vehicle_type,household_flag
std::vector<TripRecord> parse_trips_csv(const std::string& text, std::size_t horizon);
std::vector<TripRecord> read_trips_csv(const std::filesystem::path& path, std::size_t horizon);

/// Canonical text dump of a fleet model.
std::string dump_fleet(const Network& network, const FleetModel& fleet);

}  // namespace evmopf
