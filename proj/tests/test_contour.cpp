#include "qgvp/bessel.hpp"
#include "qgvp/checks.hpp"
#include "qgvp/contour.hpp"
#include "qgvp/spectrum.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numbers>

using namespace qgvp;
using namespace qgvp::contour;

namespace {
FourierCurve sample(int M) { return FourierCurve::cosine(M, 1, 0.05) + FourierCurve::cosine(M, 3, 0.025, 0.4); }
}  // namespace

TEST_CASE("the disc is an equilibrium") {
    for (int M : {64, 256}) CHECK(F_lambda(FourierCurve(M), 1.0).max_abs() <= 1e-12);
}

TEST_CASE("velocity at the disc is V0") {
    spectrum::SpectrumContext ctx;
    for (double v : V_r(FourierCurve(64), 1.0, 0.5)) CHECK(std::abs(v - spectrum::v0(ctx)) < 1e-14);
}

TEST_CASE("L_0 acts on Fourier modes by I_jK_j") {
    const int M = 64;
    for (int j : {1, 2, 5, 20}) {
        auto rho = FourierCurve::cosine(M, j, 1.0).grid();
        auto out = L_r_apply(FourierCurve(M), 0.8, rho);
        double ik = bessel::product_IK(j, 0.8);
        for (int m = 0; m < M; ++m) CHECK(std::abs(out[m] - ik * rho[m]) < 1e-13);
    }
}

TEST_CASE("linearization at the disc rotates mode j with Omega_j") {
    const int M = 64;
    spectrum::SpectrumContext ctx;
    for (int j : {1, 2, 7}) {
        FourierCurve rho(M);
        rho.set(j, 1.0);
        auto out = linearized_apply(FourierCurve(M), 1.0, 0.5, rho);
        CHECK(std::abs(out.coeff(j) - cplx(0.0, -spectrum::omega_j(ctx, j))) < 1e-13);
    }
}

TEST_CASE("kernel splitting reconstructs K0") {
    auto ks = kernel_split(sample(64), 1.3);
    CHECK(reconstruction_residual(ks) < 1e-13);
}

TEST_CASE("F commutes with rotations") {
    const int M = 64;
    auto r = sample(M);
    double a = 2.0 * std::numbers::pi * 5 / M;
    CHECK(max_abs_diff(F_lambda(r.shifted(a), 1.0), F_lambda(r, 1.0).shifted(a)) < 1e-14);
}

TEST_CASE("F preserves evenness") {
    const int M = 64;
    auto r = FourierCurve::cosine(M, 2, 0.03) + FourierCurve::cosine(M, 5, 0.01);
    auto F = F_lambda(r, 1.0);
    // even r gives odd F
    CHECK(max_abs_diff(F.reflected(), -1.0 * F) < 1e-15);
}

TEST_CASE("energy and angular impulse oracles") {
    // disc energy, independent quadrature
    CHECK(std::abs(energy(FourierCurve(64), 1.0) + 0.159826649095) < 1e-11);
    CHECK(std::abs(angular_impulse(FourierCurve(64)) - 0.25) < 1e-15);
    auto r = FourierCurve::cosine(64, 3, 1e-3);
    CHECK(std::abs(angular_impulse(r) - (0.25 + 0.5e-6)) < 1e-15);
}

TEST_CASE("energy converges spectrally in M") {
    auto r64 = sample(64), r128 = r64.resampled(128);
    CHECK(std::abs(energy(r64, 1.0) - energy(r128, 1.0)) < 1e-13);
}

TEST_CASE("central differences of F converge at second order") {
    auto lc = checks::linearization_check(1.0, 64, 4, {1e-2, 1e-3, 1e-4}, 3);
    CHECK(lc.min_order >= 1.8);
}

TEST_CASE("weak gradient identity holds with d_theta grad E = +2F") {
    CHECK(checks::gradient_identity_error(1.0, 2.0, 5, 1e-5, 64, 0) < 1e-4);
    CHECK(checks::gradient_identity_error(1.0, -2.0, 5, 1e-5, 64, 0) > 1.0);
}

TEST_CASE("curve guards") {
    CHECK_THROWS_AS(check_curve(FourierCurve::cosine(64, 2, 0.6)), std::domain_error);
    // energy spread into the top octave
    CHECK_THROWS_AS(check_curve(FourierCurve::cosine(64, 20, 0.01)), std::domain_error);
    CHECK_NOTHROW(check_curve(sample(64)));
}
