#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "evmopf/cli.hpp"
#include "test_support.hpp"

using namespace evmopf;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "evmopf");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    CliResult r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch_dir() {
    std::random_device rd;
    const auto dir = fs::temp_directory_path() / ("evmopf_cli_" + std::to_string(rd()));
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> lines_of(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> three_bus_args(const fs::path& out) {
    return {"--case", test::fixture("case3_triangle.m").string(),
            "--summer", test::fixture("demand_peaked.csv").string(),
            "--emission", test::fixture("emission_valley.csv").string(),
            "--trips", test::fixture("trips_commute.csv").string(),
            "--gasoline", "400", "-o", out.string()};
}

}  // namespace

TEST_CASE("inspect summarizes a clean case") {
    const auto r = run({"inspect", test::fixture("case2_radial.m").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind("buses=2 lines=1 gens=1\n", 0) == 0);
}

TEST_CASE("input errors exit with code 1") {
    const auto broken = run({"inspect", test::fixture("broken.m").string()});
    CHECK(broken.code == kExitInput);
    CHECK(broken.err.find("line 4") != std::string::npos);
    CHECK(run({"inspect", "/nonexistent/case.m"}).code == kExitInput);
    CHECK(run({"frobnicate"}).code == kExitInput);
    const auto dir = scratch_dir();
    auto args = three_bus_args(dir);
    args.insert(args.begin(), "pareto");
    args.push_back("--points");
    args.push_back("1");
    CHECK(run(args).code == kExitInput);
    args.back() = "3";
    args[2] = "/nonexistent/case.m";
    CHECK(run(args).code == kExitInput);
    fs::remove_all(dir);
}

TEST_CASE("config files: unknown keys are rejected, relative paths resolve") {
    const auto dir = scratch_dir();
    {
        std::ofstream f(dir / "bad.yaml");
        f << "case: x.m\nsweep:\n  pointz: 3\n";
    }
    CHECK_THROWS_AS(load_config(dir / "bad.yaml"), InputError);
    const auto c = load_config(test::fixture("case5_sweep.yaml"));
    CHECK(c.case_path == test::fixture("case5_meshed.m"));
    CHECK(c.points == 10);
    CHECK(c.benchmark);
    REQUIRE(c.gasoline_g_per_mile);
    CHECK(*c.gasoline_g_per_mile == 400.0);
    CHECK_NOTHROW(check_config(c, true, true));
    fs::remove_all(dir);
}

TEST_CASE("pareto writes one row per cap plus the benchmark") {
    const auto dir = scratch_dir();
    auto args = three_bus_args(dir);
    args.insert(args.begin(), "pareto");
    args.insert(args.end(), {"--points", "3"});
    auto r = run(args);
    REQUIRE(r.code == kExitOk);
    auto rows = lines_of(dir / "frontier.csv");
    CHECK(rows.size() == 4);
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "hourly_point_01.csv"));

    args.push_back("--benchmark");
    r = run(args);
    REQUIRE(r.code == kExitOk);
    rows = lines_of(dir / "frontier.csv");
    REQUIRE(rows.size() == 5);
    CHECK(rows.back().size() > 10);
    CHECK(rows.back().substr(rows.back().rfind(',') + 1) == "benchmark");
    CHECK(fs::exists(dir / "hourly_benchmark.csv"));

    // The manifest echoes the configuration and reloads as one.
    const auto again = load_config(dir / "manifest.json");
    CHECK(again.points == 3);
    CHECK(again.benchmark);
    fs::remove_all(dir);
}

TEST_CASE("pareto without EVs warns about a degenerate frontier") {
    const auto dir = scratch_dir();
    auto args = three_bus_args(dir);
    args.insert(args.begin(), "pareto");
    args.insert(args.end(), {"--points", "3", "--no-ev"});
    const auto r = run(args);
    CHECK(r.code == kExitOk);
    CHECK(r.err.find("degenerate frontier") != std::string::npos);
    CHECK(lines_of(dir / "frontier.csv").size() == 2);
    fs::remove_all(dir);
}
