#include "qgvp/cantor.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numbers>

using namespace qgvp;
using namespace qgvp::cantor;

TEST_CASE("cut-off function") {
    CHECK(chi(0.0) == 0.0);
    CHECK(chi(1.0 / 3.0) == 0.0);
    CHECK(chi(0.5) == 1.0);
    CHECK(chi(-0.7) == 1.0);
    CHECK(chi(0.4) > 0.0);
    CHECK(chi(0.4) < 1.0);
    CHECK(chi(-0.45) == chi(0.45));
    for (double x = 0.34; x < 0.5; x += 0.01) CHECK(chi(x + 0.005) > chi(x));
}

TEST_CASE("Melnikov conditions") {
    auto dio = DiophantineParams::defaults(1);
    std::vector<double> w{0.75};
    // |0.75*1 - 0.74*1| = 0.01 < 4 gamma^upsilon = 0.4
    CHECK_FALSE(first_melnikov_ok(w, 0.74, {1}, -1, dio));
    CHECK(first_melnikov_ok(w, 2.0, {1}, 1, dio));
    CHECK_THROWS(first_melnikov_ok(w, 1.0, {0}, 0, dio));
    std::map<int, double> mu{{1, 1.0}, {2, 1.75}};
    CHECK_FALSE(second_melnikov_ok(w, mu, {1}, 1, 2, dio));
    CHECK(second_melnikov_ok(w, mu, {0}, 1, 2, dio));
    CHECK_THROWS(second_melnikov_ok(w, mu, {0}, 1, 1, dio));
    CHECK(diophantine_ok(w, {3}, dio));
}

TEST_CASE("parameter validation") {
    auto d = DiophantineParams::defaults(2);
    CHECK_NOTHROW(d.validate(2));
    d.tau2 = d.tau1;
    CHECK_THROWS(d.validate(2));
    auto e = DiophantineParams::defaults(1);
    e.upsilon = 0.3;
    CHECK_THROWS(e.validate(1));
    e = DiophantineParams::defaults(1);
    e.N0 = 3;
    CHECK_THROWS(e.validate(1));
    e = DiophantineParams::defaults(1);
    e.tau1 = 0.9;
    CHECK_THROWS(e.validate(1));
}

TEST_CASE("sublevel sets") {
    auto sq = [](double x) { return x * x; };
    for (double a : {1e-6, 1e-4, 1e-2}) CHECK(std::abs(measure(sublevel_set(sq, -1, 1, 1001, a)) - 2 * std::sqrt(a)) < 1e-12);
    // |sin x| <= 0.1 on [0, 2 pi]: three pieces
    auto iv = sublevel_set([](double x) { return std::sin(x); }, 0.0, 2 * std::numbers::pi, 4001, 0.1);
    CHECK(iv.size() == 3);
    CHECK(std::abs(measure(iv) - 4 * std::asin(0.1)) < 1e-11);
    CHECK(measure(merge({{0, 1}, {0.5, 2}, {3, 4}})) == 3.0);
}

TEST_CASE("resonant parameter set: d = 1 empty, d = 2 linear in gamma") {
    spectrum::SpectrumContext c1;
    c1.sites = {2};
    auto r1 = resonant_complement_measure(c1, 0.5, 2.0, 10000, {0.4, 1e-3}, 1.5, 6);
    CHECK(r1.complement_measure[0] == 0.0);
    CHECK(r1.complement_measure[1] == 0.0);
    spectrum::SpectrumContext c2;
    auto r2 = resonant_complement_measure(c2, 0.5, 2.0, 10000, {1e-2, 1e-3, 1e-4}, 2.5, 8);
    CHECK(r2.complement_measure[1] < r2.complement_measure[0]);
    CHECK(r2.fitted_exponent == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r2.sum_of_measures[0] >= r2.complement_measure[0]);
    CHECK_THROWS(resonant_complement_measure(c2, 0.5, 2.0, 100, {1e-2}, 2.5, 8));
}

TEST_CASE("Russmann check for a cubic") {
    std::vector<std::function<double(double)>> f{[](double x) { return x * x * x; },
                                                 [](double x) { return 3 * x * x; },
                                                 [](double x) { return 6 * x; },
                                                 [](double) { return 6.0; }};
    auto r = russmann_check(f, -1.0, 1.0, 2001, {1e-6, 1e-4, 1e-2}, 1.0);
    CHECK(r.hypothesis_ok);
    CHECK(r.bound_ok);
    CHECK(r.fitted_exponent == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}
