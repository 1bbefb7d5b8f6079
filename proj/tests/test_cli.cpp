#include "qgvp/io.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace qgvp;

namespace {
fs::path root() { return fs::temp_directory_path() / ("qgvp_cli_" + std::to_string(::getpid())); }

int run(const std::string& args) {
    std::string cmd = std::string(QGVP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int s = std::system(cmd.c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), {});
}
}  // namespace

TEST_CASE("spectrum writes one row per mode and a manifest") {
    auto d = root() / "sp";
    REQUIRE(run("spectrum --lambda 1 --omega 0.5 --jmax 64 --out " + d.string()) == 0);
    auto t = io::read_csv(d / "spectrum.csv");
    CHECK(t.rows.size() == 64);
    auto m = io::read_json(d / "run-manifest.json");
    CHECK(m["subcommand"] == "spectrum");
    CHECK(m["flags"]["--jmax"] == 64);
    CHECK(m["exit_code"] == 0);
}

TEST_CASE("outputs are deterministic") {
    auto a = root() / "da", b = root() / "db";
    REQUIRE(run("kam-transport --d 1 --steps 2 --out " + a.string()) == 0);
    REQUIRE(run("kam-transport --d 1 --steps 2 --out " + b.string()) == 0);
    CHECK(slurp(a / "kam_transport.json") == slurp(b / "kam_transport.json"));
}

TEST_CASE("kam-transport reports decreasing delta") {
    auto d = root() / "kt";
    REQUIRE(run("kam-transport --d 1 --n0 4 --steps 4 --delta0 1e-3 --out " + d.string()) == 0);
    auto j = io::read_json(d / "kam_transport.json");
    REQUIRE(j["steps"].size() == 4);
    for (size_t k = 1; k < 4; ++k) CHECK(j["steps"][k]["delta_s0"] < j["steps"][k - 1]["delta_s0"]);
}

TEST_CASE("other subcommands produce loadable outputs") {
    auto d = root();
    REQUIRE(run("bessel-table --jmax 4 --lambdas 0.5,2 --out " + (d / "bt").string()) == 0);
    CHECK(io::read_csv(d / "bt" / "bessel_table.csv").rows.size() == 8);
    REQUIRE(run("evolve --grid 32 --dt 0.01 --t-end 0.05 --record-every 5 --out " + (d / "ev").string()) == 0);
    auto c = io::curve_from_json(io::read_json(d / "ev" / "curves" / "curve_000001.json"));
    CHECK(c.grid_size() == 32);
    REQUIRE(run("evolve --curve " + (d / "ev" / "curves" / "curve_000001.json").string() +
                " --dt 0.01 --t-end 0.02 --out " + (d / "ev2").string()) == 0);
    REQUIRE(run("kam-remainder --jmax 6 --ncap 4 --steps 2 --out " + (d / "kr").string()) == 0);
    CHECK(io::read_csv(d / "kr" / "remainder_spectrum.csv").rows.size() == 10);
    REQUIRE(run("cantor-measure --grid 10000 --gammas 1e-2,1e-3 --out " + (d / "cm").string()) == 0);
    CHECK(io::read_json(d / "cm" / "cantor_measure.json")["per_gamma"].size() == 2);
    REQUIRE(run("linearize-check --grid 64 --dirs 2 --out " + (d / "li").string()) == 0);
    CHECK(io::read_json(d / "li" / "linearize.json")["min_order"] > 1.8);
}

TEST_CASE("selftest passes") { CHECK(run("selftest --out " + (root() / "st").string()) == 0); }

TEST_CASE("exit codes") {
    auto d = root() / "bad";
    CHECK(run("spectrum --lambda -1 --out " + d.string()) == 1);
    CHECK(run("spectrum --bogus 3 --out " + d.string()) == 1);
    CHECK(run("-lambda 1 spectrum") == 1);
    CHECK(run("kam-transport --d 1 --upsilon 0.9 --out " + d.string()) == 1);
    CHECK(run("evolve --grid 32 --dt 0.5 --t-end 1 --out " + d.string()) == 1);
    CHECK(run("kam-transport --d 1 --delta0 1e6 --out " + d.string()) == 2);
    auto m = io::read_json(d / "run-manifest.json");
    CHECK(m["exit_code"] == 2);
    CHECK(m.contains("error"));
    fs::remove_all(root());
}
