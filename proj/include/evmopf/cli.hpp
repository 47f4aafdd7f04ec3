#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evmopf/fleet.hpp"
#include "evmopf/instance.hpp"
#include "evmopf/pareto.hpp"

namespace evmopf {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitSolver = 2 };

/// Bad configuration or unreadable input; maps to exit code 1.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::filesystem::path case_path;
    std::filesystem::path summer_demand;
    std::filesystem::path winter_demand;  ///< optional
    std::string season = "summer";
    std::filesystem::path emission_path;  ///< optional except for sweeps
    std::filesystem::path trips_path;     ///< required when ev is on
    bool ev = true;
    bool v2g = true;
    std::size_t points = 10;
    std::size_t threads = 1;
    double conic_tol = 1e-8;
    double nlp_tol = 1e-8;
    std::optional<double> gasoline_g_per_mile;
    std::optional<double> weight;  ///< overrides the demand-consistency weight
    double kwh_per_mile = 0.3;
    ChargingSpec charging;
    bool benchmark = false;
    std::filesystem::path output_dir = "evmopf_out";
};

/// Reads a YAML config. Relative paths resolve against the config file's directory.
/// Throws InputError on unknown keys or malformed values.
RunConfig load_config(const std::filesystem::path& path);

/// Throws InputError when an invariant fails: referenced files exist, points >= 2,
/// tolerances > 0.
void check_config(const RunConfig& config, bool needs_emission, bool needs_gasoline);

struct PreparedRun {
    MopfInstance instance;
    FleetModel fleet;
    std::vector<SeasonProfile> profiles;
    double weight = 0.0;
};

/// Parses every input and assembles the instance described by the config.
PreparedRun prepare_run(const RunConfig& config);

SolveOptions solve_options(const RunConfig& config);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evmopf
