#include "qgvp/io.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <unistd.h>

using namespace qgvp;
namespace fs = std::filesystem;

namespace {
fs::path tmpdir() {
    auto p = fs::temp_directory_path() / ("qgvp_io_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("doubles use 17 significant digits") {
    CHECK(io::format_double(1.0) == "1.0000000000000000e+00");
    CHECK(io::format_double(-0.1) == "-1.0000000000000001e-01");
    CHECK_THROWS_AS(io::format_double(std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("CSV round trip is bit exact") {
    auto dir = tmpdir();
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<io::Row> rows;
    std::vector<double> vals;
    for (int k = 0; k < 50; ++k) {
        double v = U(rng) * std::pow(10.0, 40 * U(rng));
        vals.push_back(v);
        rows.push_back({long(k), v, std::string("a,\"b\"")});
    }
    io::write_csv(dir / "t.csv", {"k", "v", "s"}, rows);
    auto t = io::read_csv(dir / "t.csv");
    REQUIRE(t.rows.size() == 50);
    for (int k = 0; k < 50; ++k) {
        CHECK(t.number(k, 1) == vals[k]);
        CHECK(t.rows[k][2] == "a,\"b\"");
    }
    std::ifstream f(dir / "t.csv", std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(f)), {});
    CHECK(all.find('\r') == std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("empty table writes the header only") {
    CHECK(io::to_csv({"a", "b"}, {}) == "a,b\n");
}

TEST_CASE("non-finite values and ragged rows are rejected") {
    CHECK_THROWS_AS(io::to_csv({"a"}, {{std::numeric_limits<double>::quiet_NaN()}}), std::invalid_argument);
    CHECK_THROWS_AS(io::to_csv({"a", "b"}, {{1.0}}), std::invalid_argument);
}

TEST_CASE("atomic writes leave no temporaries") {
    auto dir = tmpdir();
    io::write_atomic(dir / "sub" / "x.txt", "hello\n");
    io::write_atomic(dir / "sub" / "x.txt", "again\n");
    int n = 0;
    for (auto& e : fs::directory_iterator(dir / "sub")) {
        (void)e;
        ++n;
    }
    CHECK(n == 1);
    std::ifstream f(dir / "sub" / "x.txt");
    std::string s;
    std::getline(f, s);
    CHECK(s == "again");
    fs::remove_all(dir);
}

TEST_CASE("curve JSON round trip") {
    auto r = FourierCurve::cosine(32, 3, 1e-3, 0.7) + FourierCurve::cosine(32, 5, 2e-4);
    auto j = io::curve_to_json(r);
    CHECK(j["grid_size"] == 32);
    CHECK(j["coeffs"].size() == 15);
    auto back = io::curve_from_json(nlohmann::json::parse(j.dump()));
    for (int k = 1; k < 16; ++k) CHECK(back.coeff(k) == r.coeff(k));
    CHECK(back.coeff(-3) == std::conj(r.coeff(3)));
    CHECK_THROWS(io::curve_from_json(nlohmann::json{{"grid_size", 32}, {"coeffs", {{40, 1.0, 0.0}}}}));
}
