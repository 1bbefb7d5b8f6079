#include "qgvp/contour.hpp"
#include "qgvp/dynamics.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>

using namespace qgvp;
using namespace qgvp::dynamics;

TEST_CASE("disc stays at rest") {
    EvolutionConfig c;
    c.dt = 0.01;
    c.t_end = 0.1;
    auto tr = evolve(FourierCurve(32), 1.0, 0.5, c);
    CHECK(tr.final_state().max_abs() < 1e-15);
}

TEST_CASE("small data follow the linear flow") {
    const int M = 64;
    EvolutionConfig c;
    c.dt = 0.01;
    c.t_end = 1.0;
    c.monitor_energy = false;
    for (double eps : {1e-3, 1e-4}) {
        auto r0 = FourierCurve::cosine(M, 3, eps);
        auto rT = evolve(r0, 1.0, 0.5, c).final_state();
        double err = max_abs_diff(rT, linear_flow(1.0, 0.5, {{3, eps}}, 1.0, M));
        // the gap is quadratic in the amplitude
        CHECK(err < 5.0 * eps * eps);
    }
}

TEST_CASE("energy, impulse and mean are conserved") {
    EvolutionConfig c;
    c.dt = 0.01;
    c.t_end = 0.5;
    auto r0 = FourierCurve::cosine(64, 2, 0.02) + FourierCurve::cosine(64, 3, 0.01, 1.0);
    auto tr = evolve(r0, 1.0, 0.5, c);
    CHECK(tr.report.drift_E < 1e-9);
    CHECK(tr.report.drift_J < 1e-9);
    CHECK(tr.report.drift_mean < 1e-15);
}

TEST_CASE("reversibility defect is at roundoff") {
    EvolutionConfig c;
    c.dt = 0.02;
    c.t_end = 0.4;
    auto r0 = FourierCurve::cosine(64, 2, 1e-3) + FourierCurve::cosine(64, 5, 3e-4);
    CHECK(reversibility_check(r0, 1.0, 0.5, c) < 1e-9);
    CHECK_THROWS(reversibility_check(FourierCurve::cosine(64, 2, 1e-3, 0.3), 1.0, 0.5, c));
}

TEST_CASE("fourth-order convergence") {
    auto r0 = FourierCurve::cosine(64, 3, 1e-3);
    auto rr = richardson(r0, 1.0, 0.5, 0.04, 0.4);
    CHECK(rr.ratio > 12.0);
    CHECK(rr.ratio < 20.0);
}

TEST_CASE("configuration and guards") {
    EvolutionConfig c;
    c.dt = 0.03;
    c.t_end = 0.1;
    CHECK_THROWS_AS(evolve(FourierCurve::cosine(64, 3, 1e-3), 1.0, 0.5, c), std::invalid_argument);
    c.dt = 1.0;
    c.t_end = 1.0;
    CHECK_THROWS_AS(evolve(FourierCurve::cosine(64, 3, 1e-3), 1.0, 0.5, c), std::invalid_argument);
    c.dt = -1.0;
    CHECK_THROWS(c.validate());
    CHECK_FALSE(cfl_ok(FourierCurve(64), 1.0, 0.5, 0.1));
    CHECK(cfl_ok(FourierCurve(64), 1.0, 0.5, 0.01));
}

TEST_CASE("rhs is minus F minus Omega r'") {
    auto r = FourierCurve::cosine(64, 2, 0.01);
    auto a = rhs(r, 1.0, 0.5);
    auto b = -1.0 * contour::F_lambda(r, 1.0) - 0.5 * r.derivative();
    CHECK(max_abs_diff(a, b) < 1e-16);
}
