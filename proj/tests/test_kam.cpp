#include "qgvp/kam.hpp"
#include "qgvp/spectrum.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numbers>

using namespace qgvp;
using namespace qgvp::kam;

namespace {
const std::vector<double> W1{0.7548776662466927};

TorusFunction single(int d, int N, std::vector<int> l, int j, cplx v) {
    TorusFunction f(d, N);
    f.set(l, j, v);
    for (auto& x : l) x = -x;
    f.set(l, -j, std::conj(v));
    return f;
}
}  // namespace

TEST_CASE("torus function grid round trip and derivatives") {
    auto f = random_test_function(2, 6, 6, 1);
    auto g = f.grid(16);
    auto back = TorusFunction::from_grid(2, 6, 16, g);
    CHECK((back - f).sup_coeff() < 1e-15);
    auto dt = TorusFunction::from_grid(2, 6, 16, grid_d_theta(2, 16, g));
    CHECK((dt - f.d_theta()).sup_coeff() < 1e-14);
    std::vector<double> w{0.3, 1.1};
    auto dp = TorusFunction::from_grid(2, 6, 16, grid_omega_d_phi(2, 16, g, w));
    CHECK((dp - f.omega_d_phi(w)).sup_coeff() < 1e-14);
    CHECK(f.reality_defect() < 1e-16);
}

TEST_CASE("grid synthesis of a single mode") {
    auto f = single(1, 4, {1}, 2, 0.5);
    auto g = f.grid(16);
    for (int p = 0; p < 16; ++p)
        for (int m = 0; m < 16; ++m) {
            double phi = 2 * std::numbers::pi * p / 16, th = 2 * std::numbers::pi * m / 16;
            CHECK(std::abs(g[p * 16 + m] - std::cos(phi + 2 * th)) < 1e-14);
        }
    // <(1, 2)> = 2
    CHECK(f.sobolev_norm(2.0) == doctest::Approx(std::sqrt(2.0) * 0.5 * 4.0));
    CHECK(f.parity_defect(1) == 0.0);
    CHECK(f.mean() == 0.0);
}

TEST_CASE("shifted evaluation") {
    auto f = single(1, 4, {0}, 3, 0.5);
    std::vector<double> s(16 * 16, 0.1);
    auto v = grid_shift_eval(1, 16, f.grid(16), s, 7);
    for (int m = 0; m < 16; ++m) CHECK(std::abs(v[m] - std::cos(3 * (2 * std::numbers::pi * m / 16 + 0.1))) < 1e-14);
}

TEST_CASE("transport homological equation") {
    auto dio = DiophantineParams::defaults(1);
    auto f = manufactured_perturbation(1, 20, 1e-3, dio.gamma, 3.0, 0.5, 2);
    auto h = solve_transport_homological(0.9, f, W1, 16, dio);
    CHECK(transport_homological_residual(0.9, f, h.g, W1, 16, dio) < 1e-12);
    // even real f gives odd real g
    CHECK(h.g.parity_defect(-1) < 1e-20);
    CHECK(h.g.reality_defect() < 1e-20);
    CHECK(h.g.get({0}, 0) == cplx(0.0));
    CHECK(h.g.get({17}, 0) == cplx(0.0));
}

TEST_CASE("near-resonant transport modes are clipped") {
    auto dio = DiophantineParams::defaults(1);
    auto f = single(1, 8, {1}, -1, 1e-6);
    double V = W1[0] + 1e-4;  // omega - V ~ 0
    auto h = solve_transport_homological(V, f, W1, 8, dio);
    CHECK(h.clipped.size() == 2);
    CHECK(h.g.sup_coeff() == 0.0);
}

TEST_CASE("one transport step conjugates the operator") {
    auto dio = DiophantineParams::defaults(1);
    auto opt = TransportOptions::defaults(1);
    spectrum::SpectrumContext ctx;
    ctx.sites = {2};
    auto w = spectrum::frequency_vector(ctx);
    double V = spectrum::v0(ctx);
    auto f = manufactured_perturbation(1, opt.Ncap, 1e-3, dio.gamma, opt.s0, 0.5, 3);
    auto st = transport_kam_step({V, f, 0, {}}, w, 8, dio, opt);
    CHECK(st.next.V == V + f.mean());
    CHECK(st.next.f.parity_defect(1) < 1e-18);
    auto rho = random_test_function(1, opt.Ncap, 3, 4);
    CHECK(transport_conjugation_residual(V, f, st.g, st.next.V, st.next.f, w, rho, opt.G) < 1e-10);
    CHECK(st.next.f.sobolev_norm(opt.s0) < f.sobolev_norm(opt.s0));
}

TEST_CASE("transport iteration decays superlinearly") {
    auto dio = DiophantineParams::defaults(2);
    auto opt = TransportOptions::defaults(2);
    spectrum::SpectrumContext ctx;
    auto f0 = manufactured_perturbation(2, opt.Ncap, 1e-3, dio.gamma, opt.s0, 0.5, 0);
    auto run = transport_kam_run(f0, spectrum::v0(ctx), spectrum::frequency_vector(ctx), dio, 3, opt, 0);
    const auto& h = run.history;
    REQUIRE(h.size() == 4);
    for (size_t m = 1; m < h.size(); ++m) CHECK(h[m].delta_s0 < h[m - 1].delta_s0);
    CHECK(h[3].delta_s0 / h[2].delta_s0 < h[1].delta_s0 / h[0].delta_s0);
    CHECK(h[3].straightening_residual < h[0].straightening_residual);
}

TEST_CASE("large perturbations fail loudly") {
    auto dio = DiophantineParams::defaults(1);
    auto opt = TransportOptions::defaults(1);
    spectrum::SpectrumContext ctx;
    ctx.sites = {2};
    auto f0 = manufactured_perturbation(1, opt.Ncap, 1e6, dio.gamma, opt.s0, 0.5, 0);
    CHECK_THROWS_AS(transport_kam_run(f0, spectrum::v0(ctx), spectrum::frequency_vector(ctx), dio, 4, opt),
                    KamError);
}

TEST_CASE("N_m schedule and its tail sums") {
    CHECK(schedule_N(4, 0, 40) == 4);
    CHECK(schedule_N(4, 1, 40) == 8);
    CHECK(schedule_N(4, 2, 40) == 22);
    CHECK(schedule_N(4, 3, 40) == 40);
    for (int N0 : {4, 8})
        for (double a : {1.0, 2.0, 3.5})
            for (int m = 0; m <= 6; ++m) {
                double s = 0.0;
                for (int k = m; k < m + 12; ++k) s += std::pow(std::pow(double(N0), std::pow(1.5, k)), -a);
                CHECK(s <= 2.0 * std::pow(std::pow(double(N0), std::pow(1.5, m)), -a));
            }
}

TEST_CASE("Toeplitz composition is convolution in p") {
    ToeplitzOperator A(1, 3, {-2, -1, 1, 2}), B(1, 3, {-2, -1, 1, 2});
    A.set({1}, 1, 2, cplx(0, 2));
    B.set({-1}, 2, -1, cplx(0, 3));
    B.set({1}, 2, 1, 1.0);
    auto C = A * B;
    CHECK(C.get({0}, 1, -1) == cplx(-6.0, 0.0));
    CHECK(C.get({2}, 1, 1) == cplx(0, 2));
    CHECK(C.get({1}, 1, -1) == cplx(0.0));
    CHECK_THROWS(ToeplitzOperator(1, 2, {1, 2}));
}

TEST_CASE("off-diagonal norm of a single entry") {
    ToeplitzOperator A(1, 4, {-3, -1, 1, 3});
    A.set({2}, 3, -1, 0.5);
    CHECK(offdiag_norm(A, 2.0) == doctest::Approx(0.5 * 16.0));
    A.set({1}, 1, 3, 0.25);
    // (p, m) = (2, 4) and (1, -2)
    CHECK(offdiag_norm(A, 1.0) == doctest::Approx(std::sqrt(0.25 * 16 + 0.0625 * 4)));
}

TEST_CASE("contour remainder: structure and linear scaling in eps") {
    auto a = remainder_from_contour(1.0, 0.5, 2, 1e-3, 6, 4, 64, 16);
    auto b = remainder_from_contour(1.0, 0.5, 2, 2e-3, 6, 4, 64, 16);
    CHECK(a.R0.imaginary_defect() < 1e-16);
    CHECK(a.R0.reality_defect() < 1e-16);
    CHECK(a.mu0.size() == 10);
    CHECK(a.mu0.count(2) == 0);
    // the harmonic e^{i(2 theta - phi)} couples j0 to j0 + 2 at p = -1
    double g = a.R0.get({-1}, 3, 1).imag();
    CHECK(g != 0.0);
    CHECK(std::abs(b.R0.get({-1}, 3, 1).imag() / g - 2.0) < 1e-2);
    CHECK(std::abs(a.R0.get({1}, 3, 1)) < 1e-2 * std::abs(g));
    CHECK(std::abs(a.R0.get({-1}, 4, 1)) < 1e-2 * std::abs(g));
}

TEST_CASE("remainder step: homological equation and bookkeeping") {
    auto cr = remainder_from_contour(1.0, 0.5, 2, 1e-3, 6, 4, 64, 16);
    auto dio = DiophantineParams::defaults(1);
    auto hom = solve_remainder_homological(cr.mu0, cr.R0, cr.omega, 4, dio);
    CHECK(commutator_residual(cr.mu0, cr.R0, hom.Psi, cr.omega, 4, dio) < 1e-18);
    auto st = remainder_kam_step(cr.mu0, cr.R0, cr.omega, 4, dio, 3.0);
    for (auto [j, mu] : st.mu) {
        // i (mu+ - mu) equals the (0, j, j) entry
        CHECK(std::abs(cplx(0.0, mu - cr.mu0.at(j)) - cr.R0.get({0}, j, j)) < 1e-14 * std::abs(mu));
        CHECK(std::abs(mu + st.mu.at(-j)) < 1e-15);
    }
    CHECK(offdiag_norm(st.R, 3.0) < 1e-2 * offdiag_norm(cr.R0, 3.0));
    CHECK(st.R.imaginary_defect() == 0.0);
}

TEST_CASE("remainder run converges quadratically") {
    auto cr = remainder_from_contour(1.0, 0.5, 2, 1e-3, 8, 4, 64, 16);
    auto run = remainder_kam_run(cr.mu0, cr.R0, cr.omega, DiophantineParams::defaults(1), 3, 3.0);
    const auto& h = run.history;
    CHECK(h[1].offdiag_s0 < 1e-2 * h[0].offdiag_s0);
    CHECK(h[2].offdiag_s0 < 1e-4 * h[1].offdiag_s0);
}

TEST_CASE("diagonal inversion") {
    DiagonalSpectrum mu{{-3, -2.5}, {-1, -1.2}, {1, 1.2}, {3, 2.5}};
    auto dio = DiophantineParams::defaults(1);
    TorusFunction rhs = single(1, 6, {1}, 3, cplx(0.2, 0.1)) + single(1, 6, {0}, 1, 0.3);
    auto inv = invert_diagonal(mu, W1, rhs, 6, dio);
    CHECK(inv.clipped.empty());
    auto check = [&](std::vector<int> l, int j) {
        cplx u = inv.u.get(l, j);
        cplx back = cplx(0.0, W1[0] * l[0] + mu.at(j)) * u;
        CHECK(std::abs(back - rhs.get(l, j)) < 1e-16);
    };
    check({1}, 3);
    check({-1}, -3);
    check({0}, 1);
    TorusFunction bad = single(1, 6, {0}, 2, 1.0);
    CHECK_THROWS_AS(invert_diagonal(mu, W1, bad, 6, dio), std::invalid_argument);
}
