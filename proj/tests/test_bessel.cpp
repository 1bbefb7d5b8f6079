#include "qgvp/bessel.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

using namespace qgvp::bessel;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }
}  // namespace

TEST_CASE("I_jK_j against high-precision values") {
    // mpmath, 30 digits
    CHECK(rel(product_IK(1, 1.0), 0.34017335090486751908) < 1e-14);
    CHECK(rel(product_IK(5, 2.0), 0.092666464143170548174) < 1e-14);
    CHECK(rel(product_IK(20, 10.0), 0.022357329593024497626) < 1e-13);
    CHECK(rel(product_IK(3, 0.1), 0.16656265493431935803) < 1e-14);
    CHECK(rel(product_IK(50, 1.0), 0.0099979998006808373173) < 1e-14);
}

TEST_CASE("second lambda derivative of I_3K_3") {
    double ref = -0.01020680141504193861;
    CHECK(rel(product_IK_deriv(3, 1.0, 2), ref) < 1e-10);
    CHECK(rel(product_IK_deriv_leibniz(3, 1.0, 2), ref) < 1e-10);
}

TEST_CASE("three evaluation routes agree on random points") {
    std::mt19937_64 rng(0);
    std::uniform_int_distribution<int> J(1, 20);
    std::uniform_real_distribution<double> L(-2.0, 1.0);
    for (int k = 0; k < 30; ++k) {
        int j = J(rng);
        double lam = std::pow(10.0, L(rng));
        double a = product_IK_direct(j, lam);
        CHECK(rel(product_IK_nicholson(j, lam), a) < 1e-10);
        CHECK(rel(product_IK_laplace(j, lam), a) < 1e-10);
    }
}

TEST_CASE("small-lambda limit 1/(2j)") {
    for (int j = 1; j <= 10; ++j) CHECK(std::abs(product_IK(j, 1e-5) - 0.5 / j) < 1e-4);
}

TEST_CASE("I_jK_j decreases in j and in lambda") {
    for (double lam : {0.3, 1.0, 4.0})
        for (int j = 1; j < 40; ++j) CHECK(product_IK(j + 1, lam) < product_IK(j, lam));
    for (int j : {1, 4, 9}) CHECK(product_IK(j, 2.0) < product_IK(j, 1.0));
}

TEST_CASE("K series and integral paths agree") {
    for (int j : {0, 1, 3, 7})
        for (double z : {0.2, 1.0, 3.0}) CHECK(rel(K_series(j, z), K_integral(j, z)) < 1e-11);
}

TEST_CASE("J0 and its derivatives") {
    CHECK(std::abs(J0(1.0) - 0.76519768655796655145) < 1e-15);
    CHECK(std::abs(J0_quadrature(2.5, 64) - J0(2.5)) < 1e-14);
    // J0' = -J1
    CHECK(std::abs(J0_deriv(1, 1.3) + J(1, 1.3)) < 1e-15);
    double h = 1e-4;
    double fd = (J0_deriv(2, 0.7 + h) - J0_deriv(2, 0.7 - h)) / (2 * h);
    CHECK(std::abs(fd - J0_deriv(3, 0.7)) < 1e-8);
}

TEST_CASE("large-order and large-argument expansions match the direct value") {
    CHECK(rel(product_IK_asym_j(40, 2.0, 12), product_IK_direct(40, 2.0)) < 1e-12);
    CHECK(rel(product_IK_asym_lambda(2, 40.0, 10), product_IK_direct(2, 40.0)) < 1e-10);
}

TEST_CASE("kernel series and direct forms agree near the switch") {
    for (double x : {0.3, 0.5, 0.7}) {
        CHECK(std::abs(kernel_f_series(x) - kernel_f_direct(x)) < 1e-12);
        CHECK(std::abs(kernel_g_series(x) - kernel_g_direct(x)) < 1e-12);
    }
}

TEST_CASE("invalid arguments are rejected") {
    CHECK_THROWS(product_IK(1, -1.0));
    CHECK_THROWS(product_IK(1, 0.0));
    Policy p;
    p.series_terms = 0;
    CHECK_THROWS(p.validate());
}
