#include "evmopf/network.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace evmopf {

std::size_t Network::reference_bus() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].type == 3) {
            return i;
        }
    }
    if (!generators.empty()) {
        return generators.front().bus;
    }
    return 0;
}

std::size_t Network::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) {
            return i;
        }
    }
    throw std::out_of_range("no bus with id " + std::to_string(id));
}

std::vector<std::size_t> Network::load_buses() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].pd != 0.0) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> Network::generators_at_bus() const {
    std::vector<std::vector<std::size_t>> out(buses.size());
    for (std::size_t g = 0; g < generators.size(); ++g) {
        out[generators[g].bus].push_back(g);
    }
    return out;
}

double Network::total_load_p() const {
    return std::accumulate(buses.begin(), buses.end(), 0.0,
                           [](double acc, const Bus& b) { return acc + b.pd; });
}

double Network::total_load_q() const {
    return std::accumulate(buses.begin(), buses.end(), 0.0,
                           [](double acc, const Bus& b) { return acc + b.qd; });
}

BranchAdmittance build_admittance(double r, double x, double b_charge, double tap, double shift) {
    if (r * r + x * x <= 0.0) {
        throw std::invalid_argument("zero-impedance branch (r = x = 0)");
    }
    if (!(tap > 0.0)) {
        throw std::invalid_argument("branch tap ratio must be positive");
    }
    using cd = std::complex<double>;
    const cd ys = 1.0 / cd(r, x);
    const cd t = std::polar(tap, shift);
    const cd ytt = ys + cd(0.0, b_charge / 2.0);
    const cd yff = ytt / (tap * tap);
    const cd yft = -ys / std::conj(t);
    const cd ytf = -ys / t;

    BranchAdmittance y;
    y.g_ij = -yft.real();
    y.b_ij = -yft.imag();
    y.g_ji = -ytf.real();
    y.b_ji = -ytf.imag();
    y.g_ff = yff.real();
    y.b_ff = yff.imag();
    y.g_tt = ytt.real();
    y.b_tt = ytt.imag();
    return y;
}

void rebuild_incidence(Network& network) {
    for (auto& bus : network.buses) {
        bus.lines.clear();
    }
    for (std::size_t l = 0; l < network.lines.size(); ++l) {
        const auto& line = network.lines[l];
        network.buses.at(line.from).lines.push_back(l);
        if (line.to != line.from) {
            network.buses.at(line.to).lines.push_back(l);
        }
    }
}

namespace {

std::string bus_label(const Network& net, std::size_t i) {
    return "bus " + std::to_string(net.buses[i].id);
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

std::vector<Diagnostic> validate(const Network& network) {
    std::vector<Diagnostic> diags;
    auto add = [&diags](std::string code, std::string message) {
        diags.push_back({std::move(code), std::move(message)});
    };
    const std::size_t nb = network.buses.size();

    if (!(network.base_mva > 0.0)) {
        add("base mva", "baseMVA must be positive");
    }
    if (nb == 0) {
        add("empty network", "network has no buses");
        return diags;
    }

    for (std::size_t i = 0; i < nb; ++i) {
        const auto& bus = network.buses[i];
        if (!(bus.v_min > 0.0)) {
            add("voltage bound sign", bus_label(network, i) + ": v_min must be positive");
        }
        if (bus.v_min > bus.v_max) {
            add("voltage bound order", bus_label(network, i) + ": v_min exceeds v_max");
        }
    }

    for (std::size_t g = 0; g < network.generators.size(); ++g) {
        const auto& gen = network.generators[g];
        const std::string label = "generator " + std::to_string(g);
        if (gen.bus >= nb) {
            add("dangling generator", label + " references a missing bus");
        }
        if (gen.p_min > gen.p_max) {
            add("real power bound order", label + ": p_min exceeds p_max");
        }
        if (gen.q_min > gen.q_max) {
            add("reactive power bound order", label + ": q_min exceeds q_max");
        }
        if (!gen.cost.is_convex()) {
            add("nonconvex cost", label + ": negative quadratic cost coefficient");
        }
    }

    std::vector<std::size_t> parent(nb);
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t l = 0; l < network.lines.size(); ++l) {
        const auto& line = network.lines[l];
        const std::string label = "line " + std::to_string(l);
        if (line.from >= nb || line.to >= nb) {
            add("dangling line", label + " references a missing bus");
            continue;
        }
        if (!(line.s_max > 0.0)) {
            add("flow limit", label + ": apparent power limit must be positive");
        }
        if (!(line.angle_max > 0.0) || line.angle_max > std::numbers::pi / 2 + 1e-12) {
            add("angle limit", label + ": angle bound must lie in (0, pi/2]");
        }
        parent[find_root(parent, line.from)] = find_root(parent, line.to);
    }

    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t l : network.buses[i].lines) {
            if (l >= network.lines.size() ||
                (network.lines[l].from != i && network.lines[l].to != i)) {
                add("neighbor list", bus_label(network, i) + " lists a line it does not touch");
            }
        }
    }

    std::size_t components = 0;
    for (std::size_t i = 0; i < nb; ++i) {
        if (find_root(parent, i) == i) {
            ++components;
        }
    }
    if (components > 1) {
        std::ostringstream msg;
        msg << "network graph has " << components << " connected components";
        add("disconnected", msg.str());
    }
    return diags;
}

BranchFlows branch_flows(const BranchAdmittance& y, double cii, double cjj, double cij, double sij) {
    BranchFlows f;
    f.p_ij = y.g_ff * cii - y.g_ij * cij + y.b_ij * sij;
    f.q_ij = -y.b_ff * cii + y.b_ij * cij + y.g_ij * sij;
    f.p_ji = y.g_tt * cjj - y.g_ji * cij - y.b_ji * sij;
    f.q_ji = -y.b_tt * cjj + y.b_ji * cij - y.g_ji * sij;
    return f;
}

BranchFlows branch_flows_polar(const BranchAdmittance& y, double vi, double vj, double theta_i,
                               double theta_j) {
    const double d = theta_i - theta_j;
    return branch_flows(y, vi * vi, vj * vj, vi * vj * std::cos(d), -vi * vj * std::sin(d));
}

}  // namespace evmopf
