#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "evmopf/network.hpp"

namespace evmopf {

/// Raised for malformed or unsupported case text. line/column are 1-based; 0 when the
/// problem is not tied to a text position (e.g. a dangling bus reference).
class CaseParseError : public std::runtime_error {
public:
    CaseParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Parses the MATPOWER subset used by PGLIB-OPF: baseMVA plus the bus, gen, branch and
/// gencost matrices. Other assignments (bus_name cells etc.) are skipped. Out-of-service
/// generators and branches are dropped. Quantities are converted to per-unit on baseMVA,
/// angles to radians. Only polynomial costs of degree <= 2 are accepted.
Network parse_case(std::string_view text);
Network parse_case_file(const std::filesystem::path& path);

/// Writes a MATPOWER case that parse_case reads back into the same network.
std::string write_case(const Network& network);

/// Canonical key-value dump, one record per line, used for golden comparisons.
std::string dump_network(const Network& network);

}  // namespace evmopf
