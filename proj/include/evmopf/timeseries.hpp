#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evmopf/network.hpp"

namespace evmopf {

constexpr std::size_t kDefaultHorizon = 24;

/// Hourly consumption shape normalized by the maximum over every season passed to
/// normalize_profiles, so only the overall peak maps to 1.0.
struct SeasonProfile {
    std::string season;
    std::vector<double> values;

    std::size_t horizon() const { return values.size(); }
    double total() const;
};

/// Marginal emission factors, kg CO2 per MWh, one per period.
struct EmissionSeries {
    std::vector<double> kg_per_mwh;

    std::size_t horizon() const { return kg_per_mwh.size(); }
};

/// Per-unit loads indexed bus x period.
struct PeriodLoads {
    Eigen::MatrixXd p;
    Eigen::MatrixXd q;

    std::size_t horizon() const { return static_cast<std::size_t>(p.cols()); }
    double total_p() const { return p.sum(); }
};

struct RawSeason {
    std::string season;
    std::vector<double> kwh;
};

/// Throws std::invalid_argument on empty input, unequal lengths or nonpositive entries.
std::vector<SeasonProfile> normalize_profiles(const std::vector<RawSeason>& raw);

PeriodLoads scale_loads(const Network& network, const SeasonProfile& shape);

/// weight = grid_total / max(summer_total, winter_total); throws on a zero denominator.
double compute_weight(double grid_total, double summer_total, double winter_total);

/// Reads a `hour,value` CSV with a header row. Hours must be exactly 0..T-1 in order.
std::vector<double> read_hourly_csv(const std::filesystem::path& path);
std::vector<double> parse_hourly_csv(const std::string& text);
std::string write_hourly_csv(const std::vector<double>& values);

}  // namespace evmopf
