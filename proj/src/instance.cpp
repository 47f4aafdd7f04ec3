#include "evmopf/instance.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace evmopf {

std::size_t MopfInstance::ev_slot(std::size_t bus) const {
    for (std::size_t k = 0; k < ev.size(); ++k) {
        if (ev[k].bus == bus) {
            return k;
        }
    }
    return std::numeric_limits<std::size_t>::max();
}

double MopfInstance::baseline_total(std::size_t t) const {
    if (baseline.size() == 0) {
        return 0.0;
    }
    return baseline.col(static_cast<Eigen::Index>(t)).sum();
}

double MopfInstance::marginal_emission(const std::vector<double>& gen_pu) const {
    double kg = 0.0;
    for (std::size_t t = 0; t < gen_pu.size() && t < emission.size(); ++t) {
        kg += emission[t] * network.base_mva * (gen_pu[t] - baseline_total(t));
    }
    return kg;
}

double kwh_to_pu(double kwh, double base_mva) { return kwh / (1000.0 * base_mva); }

double pu_to_kwh(double pu, double base_mva) { return pu * 1000.0 * base_mva; }

namespace {

bool is_active(const FleetGroup& g) {
    const auto nonzero = [](const std::vector<double>& v) {
        return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
    };
    return nonzero(g.energy) || nonzero(g.charge_max) || nonzero(g.discharge_max) ||
           nonzero(g.stock_max);
}

}  // namespace

MopfInstance assemble_instance(const Network& network, const PeriodLoads& loads,
                               const FleetModel& fleet, const std::vector<double>& emission,
                               const InstanceOptions& options) {
    const auto diagnostics = validate(network);
    if (!diagnostics.empty()) {
        throw std::invalid_argument("invalid network: " + diagnostics.front().code + ": " +
                                    diagnostics.front().message);
    }
    const std::size_t horizon = loads.horizon();
    if (horizon == 0) {
        throw std::invalid_argument("load series has no periods");
    }
    if (static_cast<std::size_t>(loads.p.rows()) != network.buses.size() ||
        loads.q.rows() != loads.p.rows() || loads.q.cols() != loads.p.cols()) {
        throw std::invalid_argument("load matrix does not match the bus count");
    }
    if (!emission.empty() && emission.size() != horizon) {
        throw std::invalid_argument("emission series has " + std::to_string(emission.size()) +
                                    " periods, loads have " + std::to_string(horizon));
    }
    if ((options.emission_cap_kg || options.objective == Objective::emission) && emission.empty()) {
        throw std::invalid_argument("emission factors are required for a cap or emission objective");
    }
    if (options.ev_enabled) {
        if (fleet.groups.size() != network.buses.size()) {
            throw std::invalid_argument("fleet has " + std::to_string(fleet.groups.size()) +
                                        " groups for " + std::to_string(network.buses.size()) +
                                        " buses");
        }
        if (fleet.horizon != horizon) {
            throw std::invalid_argument("fleet horizon " + std::to_string(fleet.horizon) +
                                        " differs from load horizon " + std::to_string(horizon));
        }
    }

    MopfInstance inst;
    inst.network = network;
    for (auto& g : inst.network.generators) {
        if (g.cost.is_zero_operating()) {
            g.p_min = 0.0;
        }
    }
    inst.loads = loads;
    inst.emission = emission;
    inst.emission_cap_kg = options.emission_cap_kg;
    inst.baseline = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(network.buses.size()),
                                          static_cast<Eigen::Index>(horizon));
    inst.ev_enabled = options.ev_enabled;
    inst.v2g_enabled = options.v2g_enabled;
    inst.objective = options.objective;
    if (!options.ev_enabled) {
        return inst;
    }
    const double base = network.base_mva;
    for (const auto& g : fleet.groups) {
        if (!is_active(g)) {
            continue;
        }
        if (g.bus >= network.buses.size() || g.horizon() != horizon) {
            throw std::invalid_argument("fleet group does not match the network");
        }
        EvBus e;
        e.bus = g.bus;
        e.efficiency = g.efficiency;
        e.initial = kwh_to_pu(g.initial, base);
        for (std::size_t t = 0; t < horizon; ++t) {
            e.energy.push_back(kwh_to_pu(g.energy[t], base));
            e.charge_max.push_back(kwh_to_pu(g.charge_max[t], base));
            e.discharge_max.push_back(options.v2g_enabled ? kwh_to_pu(g.discharge_max[t], base)
                                                          : 0.0);
            e.stock_min.push_back(kwh_to_pu(g.stock_min[t], base));
            e.stock_max.push_back(kwh_to_pu(g.stock_max[t], base));
        }
        inst.ev.push_back(std::move(e));
    }
    std::sort(inst.ev.begin(), inst.ev.end(),
              [](const EvBus& a, const EvBus& b) { return a.bus < b.bus; });
    return inst;
}

FleetModel empty_fleet(const Network& network, std::size_t horizon) {
    FleetModel fleet;
    fleet.horizon = horizon;
    for (std::size_t i = 0; i < network.buses.size(); ++i) {
        fleet.groups.push_back(empty_fleet_group(i, horizon, 0.9));
    }
    return fleet;
}

}  // namespace evmopf
