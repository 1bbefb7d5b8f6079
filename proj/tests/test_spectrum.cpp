#include "qgvp/spectrum.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>
#include <set>

using namespace qgvp::spectrum;

TEST_CASE("Omega_j oracles at lambda = 1, Omega = 1/2") {
    SpectrumContext ctx;
    CHECK(omega_j(ctx, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(omega_j(ctx, 2) - 1.2392105133366025168) < 1e-14);
    CHECK(std::abs(omega_j(ctx, 3) - 2.0482486173201458988) < 1e-14);
    CHECK(std::abs(omega_j(ctx, 10) - 7.9042392118431634634) < 1e-13);
    CHECK(std::abs(v0(ctx) - (0.5 + 0.34017335090486751908)) < 1e-15);
}

TEST_CASE("Omega_j is odd and Omega_0 vanishes") {
    SpectrumContext ctx;
    ctx.lambda = 1.7;
    CHECK(omega_j(ctx, 0) == 0.0);
    for (int j = 1; j < 30; ++j) CHECK(omega_j(ctx, -j) == -omega_j(ctx, j));
}

TEST_CASE("Omega_j / j strictly increasing") {
    for (double lam : {0.5, 1.0, 2.0}) {
        SpectrumContext ctx;
        ctx.lambda = lam;
        for (int j = 1; j < 200; ++j) CHECK(omega_j(ctx, j + 1) / (j + 1) > omega_j(ctx, j) / j);
    }
}

TEST_CASE("frequency vector follows the sites") {
    SpectrumContext ctx;
    auto w = frequency_vector(ctx);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == omega_j(ctx, 2));
    CHECK(w[1] == omega_j(ctx, 3));
}

TEST_CASE("asymptotic residual is O(j^-4)") {
    SpectrumContext ctx;
    auto rows = asymptotic_residual(ctx, 20, 200);
    for (const auto& r : rows) {
        double direct = r.omega - v0(ctx) * r.j + 0.5 - 1.0 / (4.0 * r.j * r.j);
        CHECK(std::abs(r.residual - direct) < 1e-12);
        CHECK(std::abs(r.scaled) < 0.07);
    }
    // j^4 residual approaches 1/16 from below
    CHECK(std::abs(rows.back().scaled - 0.0625) < 1e-3);
}

TEST_CASE("omega derivative matches finite differences") {
    SpectrumContext ctx;
    double h = 1e-4;
    for (int j : {2, 5}) {
        double fd = (omega_j(ctx.with_lambda(1.0 + h), j) - omega_j(ctx.with_lambda(1.0 - h), j)) / (2 * h);
        CHECK(std::abs(omega_j_deriv(ctx, j, 1) - fd) < 1e-7);
    }
}

TEST_CASE("closed-form determinant equals brute force") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> size(1, 5), site(1, 12);
    for (int t = 0; t < 40; ++t) {
        std::set<int> s;
        int k = size(rng);
        while (int(s.size()) < k) s.insert(site(rng));
        std::vector<int> v(s.begin(), s.end());
        double a = nondegeneracy_det(v), b = nondegeneracy_det_bruteforce(v);
        CHECK(std::abs(a - b) <= 1e-10 * std::abs(a));
    }
}

TEST_CASE("l enumeration") {
    auto all = enumerate_l(2, 2, false);
    // |l|_1 in {1,2} in Z^2: 4 + 8
    CHECK(all.size() == 12);
    CHECK(enumerate_l(2, 2, true).size() == 6);
    CHECK(bracket({0, 0}) == 1.0);
    CHECK(bracket({-2, 3}) == 5.0);
}

TEST_CASE("transversality constants are positive on a small scan") {
    SpectrumContext ctx;
    auto scan = transversality_scan(ctx, {0.6, 1.0, 1.5}, 3, 3, 2, 1e-4);
    for (const auto& c : scan.cases) CHECK(c.rho0_estimate > 0.0);
    CHECK(scan.fd_max_discrepancy < 1e-5);
}

TEST_CASE("context validation") {
    SpectrumContext ctx;
    ctx.lambda = -1.0;
    CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
    SpectrumContext c2;
    c2.sites = {2, 2};
    CHECK_THROWS(c2.validate());
    SpectrumContext c3;
    c3.sites = {0};
    CHECK_THROWS(c3.validate());
}
