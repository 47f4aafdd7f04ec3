#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evmopf/fleet.hpp"
#include "evmopf/network.hpp"
#include "evmopf/timeseries.hpp"

namespace evmopf {

enum class Objective { cost, emission };

/// EV aggregate of one bus in per-unit power; with one-hour periods the same numbers are
/// per-unit energy. kWh and kW convert through 1000 * base_mva.
struct EvBus {
    std::size_t bus = 0;
    std::vector<double> energy;
    std::vector<double> charge_max;
    std::vector<double> discharge_max;
    std::vector<double> stock_min;
    std::vector<double> stock_max;
    double efficiency = 0.9;
    double initial = 0.0;
};

struct InstanceOptions {
    bool ev_enabled = true;
    bool v2g_enabled = true;
    Objective objective = Objective::cost;
    std::optional<double> emission_cap_kg;
};

struct MopfInstance {
    Network network;  ///< generator bounds already adjusted
    PeriodLoads loads;
    std::vector<EvBus> ev;             ///< buses carrying an EV group, ascending bus index
    std::vector<double> emission;      ///< kg/MWh per period, may be empty
    std::optional<double> emission_cap_kg;
    Eigen::MatrixXd baseline;          ///< per-unit generation, bus x period (zero until set)
    bool ev_enabled = true;
    bool v2g_enabled = true;
    Objective objective = Objective::cost;

    std::size_t horizon() const { return loads.horizon(); }
    bool has_emissions() const { return !emission.empty(); }
    /// Index into `ev` for a bus, or npos.
    std::size_t ev_slot(std::size_t bus) const;
    /// sum_i baseline(i, t)
    double baseline_total(std::size_t t) const;
    /// kg emitted by per-period total generation `gen_pu` relative to the baseline.
    double marginal_emission(const std::vector<double>& gen_pu) const;
};

/// Converts a kWh (or kW over one hour) quantity to per-unit.
double kwh_to_pu(double kwh, double base_mva);
double pu_to_kwh(double pu, double base_mva);

/// Throws std::invalid_argument on horizon mismatch, a fleet of the wrong size, a cap
/// without emission factors, or an invalid network.
MopfInstance assemble_instance(const Network& network, const PeriodLoads& loads,
                               const FleetModel& fleet, const std::vector<double>& emission,
                               const InstanceOptions& options);

/// Fleet with no EVs, for no-EV runs.
FleetModel empty_fleet(const Network& network, std::size_t horizon);

}  // namespace evmopf
