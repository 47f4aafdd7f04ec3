#include "evmopf/timeseries.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evmopf/text_util.hpp"

namespace evmopf {

double SeasonProfile::total() const {
    return std::accumulate(values.begin(), values.end(), 0.0);
}

std::vector<SeasonProfile> normalize_profiles(const std::vector<RawSeason>& raw) {
    if (raw.empty()) {
        throw std::invalid_argument("no seasonal series given");
    }
    const std::size_t horizon = raw.front().kwh.size();
    double peak = 0.0;
    for (const auto& season : raw) {
        if (season.kwh.empty()) {
            throw std::invalid_argument("season '" + season.season + "' has an empty series");
        }
        if (season.kwh.size() != horizon) {
            throw std::invalid_argument("seasonal series lengths differ");
        }
        for (double v : season.kwh) {
            if (!(v > 0.0)) {
                throw std::invalid_argument("season '" + season.season +
                                            "' has a nonpositive consumption value");
            }
            peak = std::max(peak, v);
        }
    }
    std::vector<SeasonProfile> out;
    out.reserve(raw.size());
    for (const auto& season : raw) {
        SeasonProfile p;
        p.season = season.season;
        p.values.reserve(horizon);
        for (double v : season.kwh) {
            p.values.push_back(v == peak ? 1.0 : v / peak);
        }
        out.push_back(std::move(p));
    }
    return out;
}

PeriodLoads scale_loads(const Network& network, const SeasonProfile& shape) {
    const auto nb = static_cast<Eigen::Index>(network.buses.size());
    const auto nt = static_cast<Eigen::Index>(shape.horizon());
    PeriodLoads loads{Eigen::MatrixXd(nb, nt), Eigen::MatrixXd(nb, nt)};
    for (Eigen::Index i = 0; i < nb; ++i) {
        const auto& bus = network.buses[static_cast<std::size_t>(i)];
        for (Eigen::Index t = 0; t < nt; ++t) {
            const double u = shape.values[static_cast<std::size_t>(t)];
            loads.p(i, t) = bus.pd * u;
            loads.q(i, t) = bus.qd * u;
        }
    }
    return loads;
}

double compute_weight(double grid_total, double summer_total, double winter_total) {
    const double denom = std::max(summer_total, winter_total);
    if (!(denom > 0.0)) {
        throw std::invalid_argument("weight denominator max(summer, winter) must be positive");
    }
    return grid_total / denom;
}

std::vector<double> parse_hourly_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = text::trim(line);
        if (trimmed.empty()) {
            continue;
        }
        const auto fields = text::split(trimmed, ',');
        if (!header_seen) {
            header_seen = true;
            if (fields.size() != 2 || text::to_lower(fields[0]) != "hour" ||
                text::to_lower(fields[1]) != "value") {
                throw std::invalid_argument("hourly CSV must start with header 'hour,value'");
            }
            continue;
        }
        if (fields.size() != 2) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": expected two columns");
        }
        const auto hour = text::parse_int(fields[0]);
        const auto value = text::parse_double(fields[1]);
        if (!hour || !value) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": bad number");
        }
        if (*hour != static_cast<long long>(values.size())) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected hour " +
                                        std::to_string(values.size()) + ", got " +
                                        std::to_string(*hour));
        }
        values.push_back(*value);
    }
    if (values.empty()) {
        throw std::invalid_argument("hourly CSV has no data rows");
    }
    return values;
}

std::vector<double> read_hourly_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_hourly_csv(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::string write_hourly_csv(const std::vector<double>& values) {
    std::ostringstream out;
    out << "hour,value\n";
    for (std::size_t t = 0; t < values.size(); ++t) {
        out << t << ',' << text::format_double(values[t]) << '\n';
    }
    return out.str();
}

}  // namespace evmopf
