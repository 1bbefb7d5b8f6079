#include "qgvp/checks.hpp"

#include "qgvp/bessel.hpp"
#include "qgvp/cantor.hpp"
#include "qgvp/contour.hpp"
#include "qgvp/dynamics.hpp"
#include "qgvp/io.hpp"
#include "qgvp/kam.hpp"
#include "qgvp/spectrum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <numbers>
#include <sstream>
#include <unistd.h>

namespace qgvp::checks {

namespace {

std::string fmt(const char* f, double a) {
    char b[64];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

struct Detail {
    std::ostringstream os;
    template <class T>
    Detail& kv(const std::string& k, T v) {
        if (os.tellp() > 0) os << ", ";
        os << k << "=" << v;
        return *this;
    }
    Detail& num(const std::string& k, double v) { return kv(k, fmt("%.3e", v)); }
    std::string str() const { return os.str(); }
};

FourierCurve base_curve(int M) {
    return FourierCurve::cosine(M, 1, 0.05) + FourierCurve::cosine(M, 3, 0.025);
}

FourierCurve random_curve(int M, int jmax, double amp, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    FourierCurve h(M);
    for (int j = 1; j <= jmax; ++j) h.set(j, amp * cplx(U(rng), U(rng)));
    return h;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    size_t n = x.size();
    for (size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

double grid_inner(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s / double(a.size());
}

double bessel_max_disagreement(int jmax, const std::vector<double>& lambdas) {
    double worst = 0.0;
    for (double lam : lambdas)
        for (int j = 1; j <= jmax; ++j) {
            double a = bessel::product_IK_direct(j, lam), b = bessel::product_IK_nicholson(j, lam),
                   c = bessel::product_IK_laplace(j, lam);
            worst = std::max({worst, std::abs(a - b) / std::abs(a), std::abs(a - c) / std::abs(a),
                              std::abs(b - c) / std::abs(a)});
        }
    return worst;
}

CheckResult bessel_cross(int jmax, std::vector<double> lambdas, double budget) {
    auto t0 = std::chrono::steady_clock::now();
    double worst = bessel_max_disagreement(jmax, lambdas);
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CheckResult r;
    r.pass = worst <= 1e-10 && s < budget;
    r.detail = Detail().num("max_pairwise_rel", worst).num("tol", 1e-10).num("runtime_s", s).str();
    return r;
}

CheckResult small_lambda() {
    double worst = 0.0;
    for (int j = 1; j <= 10; ++j) worst = std::max(worst, std::abs(bessel::product_IK(j, 1e-5) - 0.5 / j));
    return {"", "", worst <= 1e-4, Detail().num("max_abs_dev", worst).num("tol", 1e-4).str()};
}

CheckResult monotonicity(const std::vector<double>& lambdas, int jmax) {
    int viol = 0;
    for (double lam : lambdas) {
        spectrum::SpectrumContext ctx;
        ctx.lambda = lam;
        double prev = -std::numeric_limits<double>::infinity();
        for (int j = 1; j <= jmax; ++j) {
            double v = spectrum::omega_j(ctx, j) / j;
            if (!(v > prev)) ++viol;
            prev = v;
        }
    }
    return {"", "", viol == 0, Detail().kv("violations", viol).str()};
}

CheckResult nondegeneracy(int n_sets, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size(1, 5), site(1, 12);
    double worst = 0.0;
    for (int t = 0; t < n_sets; ++t) {
        std::set<int> s;
        int k = size(rng);
        while (int(s.size()) < k) s.insert(site(rng));
        std::vector<int> v(s.begin(), s.end());
        double a = spectrum::nondegeneracy_det(v), b = spectrum::nondegeneracy_det_bruteforce(v);
        worst = std::max(worst, std::abs(a - b) / std::abs(a));
    }
    return {"", "", worst <= 1e-10, Detail().kv("sets", n_sets).num("max_rel", worst).num("tol", 1e-10).str()};
}

CheckResult equilibrium(int M) {
    double v = contour::F_lambda(FourierCurve(M), 1.0).max_abs();
    return {"", "", v <= 1e-12, Detail().kv("M", M).num("supF0", v).num("tol", 1e-12).str()};
}

CheckResult linearization(int M, int n_dirs, std::uint64_t seed) {
    auto lc = linearization_check(1.0, M, n_dirs, {1e-2, 1e-3, 1e-4}, seed);
    return {"", "", lc.min_order >= 1.8,
            Detail().kv("dirs", n_dirs).num("min_order", lc.min_order).num("max_rel_err", lc.max_rel_error).str()};
}

CheckResult gradient(double c, int n, std::uint64_t seed) {
    double e = gradient_identity_error(1.0, c, n, 1e-5, 64, seed);
    double other = gradient_identity_error(1.0, -c, n, 1e-5, 64, seed);
    return {"", "", e <= 1e-3,
            Detail().kv("c", c).num("max_rel_err", e).num("tol", 1e-3).num("max_rel_err_opposite_sign", other).str()};
}

CheckResult conservation() {
    auto t0 = std::chrono::steady_clock::now();
    const int M = 64;
    auto r0 = FourierCurve::cosine(M, 3, 1e-3);
    dynamics::EvolutionConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;
    cfg.record_every = 10;
    auto tr = dynamics::evolve(r0, 1.0, 0.5, cfg);
    auto rich = dynamics::richardson(r0, 1.0, 0.5, 0.04, 1.0);
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& rep = tr.report;
    bool ok = rep.drift_E <= 1e-8 && rep.drift_J <= 1e-8 && rep.drift_mean <= 1e-13 && rich.ratio >= 12.0 &&
              rich.ratio <= 20.0 && s < 60.0;
    return {"", "", ok,
            Detail()
                .num("drift_E", rep.drift_E)
                .num("drift_J", rep.drift_J)
                .num("mean", rep.drift_mean)
                .num("richardson_ratio(dt=0.04)", rich.ratio)
                .num("runtime_s", s)
                .str()};
}

CheckResult reversibility(double eps, double t_end, double dt) {
    const int M = 64;
    auto r0 = FourierCurve::cosine(M, 2, eps) + FourierCurve::cosine(M, 3, 0.5 * eps);
    dynamics::EvolutionConfig cfg;
    cfg.dt = dt;
    cfg.t_end = t_end;
    double v = dynamics::reversibility_check(r0, 1.0, 0.5, cfg);
    return {"", "", v <= 1e-8, Detail().num("eps", eps).num("defect", v).num("tol", 1e-8).str()};
}

CheckResult transport_residual(int n_points, std::uint64_t seed) {
    using namespace kam;
    auto dio = DiophantineParams::defaults(1);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.2, 2.0);
    const int N = 16;
    double worst = 0.0;
    int accepted = 0, tried = 0;
    while (accepted < n_points && tried < 1000000) {
        ++tried;
        std::vector<double> w{U(rng)};
        double V = U(rng);
        bool ok = true;
        for (int l = -N; l <= N && ok; ++l)
            for (int j = -N; j <= N && ok; ++j) {
                if ((l == 0 && j == 0) || bracket_lj({l}, j) > N) continue;
                ok = cantor::first_melnikov_ok(w, V, {l}, j, dio);
            }
        if (!ok) continue;
        auto f = random_test_function(1, N, N, seed + 1000 + accepted);
        auto h = solve_transport_homological(V, f, w, N, dio);
        worst = std::max(worst, transport_homological_residual(V, f, h.g, w, N, dio));
        ++accepted;
    }
    return {"", "", accepted == n_points && worst <= 1e-12,
            Detail().kv("points", accepted).kv("draws", tried).num("max_residual", worst).num("tol", 1e-12).str()};
}

CheckResult transport_decay(int d, int steps, std::uint64_t seed) {
    using namespace kam;
    auto dio = DiophantineParams::defaults(d);
    auto opt = TransportOptions::defaults(d);
    spectrum::SpectrumContext ctx;
    if (d == 1) ctx.sites = {2};
    auto w = spectrum::frequency_vector(ctx);
    auto f0 = manufactured_perturbation(d, opt.Ncap, 1e-3, dio.gamma, opt.s0, 0.5, seed);
    auto run = transport_kam_run(f0, spectrum::v0(ctx), w, dio, steps, opt, seed);
    const auto& h = run.history;
    bool dec = true, sdec = true;
    for (size_t m = 1; m < h.size(); ++m) {
        dec = dec && h[m].delta_s0 < h[m - 1].delta_s0;
        sdec = sdec && h[m].straightening_residual < h[m - 1].straightening_residual;
    }
    double q1 = h[1].delta_s0 / h[0].delta_s0, q3 = h[3].delta_s0 / h[2].delta_s0;
    std::ostringstream ds, rs;
    for (const auto& x : h) {
        ds << fmt("%.2e", x.delta_s0) << (&x == &h.back() ? "" : "/");
        rs << fmt("%.2e", x.straightening_residual) << (&x == &h.back() ? "" : "/");
    }
    return {"", "", dec && sdec && q3 < q1,
            Detail()
                .kv("d", d)
                .kv("delta", ds.str())
                .num("d3/d2", q3)
                .num("d1/d0", q1)
                .kv("straightening", rs.str())
                .str()};
}

CheckResult remainder_reduction(int Jmax, int Ncap, int P, int steps, double drop_req) {
    using namespace kam;
    auto cr = remainder_from_contour(1.0, 0.5, 2, 1e-3, Jmax, Ncap, 64, P);
    auto dio = DiophantineParams::defaults(1);
    auto run = remainder_kam_run(cr.mu0, cr.R0, cr.omega, dio, steps, 3.0);
    double drop = run.history.front().offdiag_s0 / std::max(run.history.back().offdiag_s0, 1e-300);
    double odd = 0.0;
    std::vector<double> jr;
    for (auto [j, m] : run.mu_inf) {
        odd = std::max(odd, std::abs(m + run.mu_inf.at(-j)));
        jr.push_back(std::abs(j) * std::abs(m - cr.mu0.at(j)));
    }
    auto sorted = jr;
    std::sort(sorted.begin(), sorted.end());
    double med = 0.5 * (sorted[(sorted.size() - 1) / 2] + sorted[sorted.size() / 2]);
    double mx = sorted.back();
    bool ok = drop >= drop_req && odd <= 1e-12 && mx <= 10.0 * med;
    return {"", "", ok,
            Detail()
                .num("norm_drop", drop)
                .num("mu_oddness", odd)
                .num("max_j_r/median", mx / med)
                .str()};
}

CheckResult cantor_measure() {
    auto t0 = std::chrono::steady_clock::now();
    spectrum::SpectrumContext ctx;
    std::vector<double> gam{1e-2, 1e-3, 1e-4, 1e-5};
    auto rep = cantor::resonant_complement_measure(ctx, 0.5, 2.0, 20000, gam, ctx.sites.size() + 0.5, 8);
    bool mono = true;
    for (size_t k = 1; k < gam.size(); ++k) mono = mono && rep.complement_measure[k] <= rep.complement_measure[k - 1];
    spectrum::SpectrumContext c1;
    c1.sites = {2};
    auto r1 = cantor::resonant_complement_measure(c1, 0.5, 2.0, 20000, {0.4, 1e-2, 1e-3, 1e-4, 1e-5}, 1.5, 8);
    bool empty = true;
    for (double m : r1.complement_measure) empty = empty && m == 0.0;
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {"", "", mono && rep.fitted_exponent > 0.0 && empty && s < 120.0,
            Detail()
                .num("measure(1e-2)", rep.complement_measure.front())
                .num("measure(1e-5)", rep.complement_measure.back())
                .kv("non_increasing", mono)
                .num("slope", rep.fitted_exponent)
                .kv("d1_empty", empty)
                .num("runtime_s", s)
                .str()};
}

CheckResult russmann() {
    std::vector<std::function<double(double)>> f{[](double x) { return x * x; }, [](double x) { return 2 * x; },
                                                 [](double) { return 2.0; }};
    std::vector<double> al{1e-6, 1e-4, 1e-2};
    auto res = cantor::russmann_check(f, -1.0, 1.0, 2001, al, 1.0);
    double worst = 0.0;
    for (size_t k = 0; k < al.size(); ++k)
        worst = std::max(worst, std::abs(res.measures[k] - 2.0 * std::sqrt(al[k])) / (2.0 * std::sqrt(al[k])));
    return {"", "", worst <= 1e-6 && res.hypothesis_ok,
            Detail().num("max_rel", worst).num("tol", 1e-6).kv("bound_ok", res.bound_ok).str()};
}

CheckResult asymptotics() {
    auto t0 = std::chrono::steady_clock::now();
    spectrum::SpectrumContext ctx;
    auto rows = spectrum::asymptotic_residual(ctx, 20, 200);
    double all = 0.0, lo = 0.0, hi = 0.0;
    for (const auto& r : rows) {
        double v = std::abs(r.scaled);
        all = std::max(all, v);
        if (r.j <= 40) lo = std::max(lo, v);
        if (r.j >= 100) hi = std::max(hi, v);
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool bounded = std::isfinite(all) && all <= 1.0;
    return {"", "", bounded && hi <= lo && s < 2.0,
            Detail()
                .num("max_scaled[20,200]", all)
                .kv("bounded", bounded)
                .num("max[20,40]", lo)
                .num("max[100,200]", hi)
                .num("runtime_s", s)
                .str()};
}

CheckResult conjugation_step() {
    using namespace kam;
    auto dio = DiophantineParams::defaults(1);
    auto opt = TransportOptions::defaults(1);
    spectrum::SpectrumContext ctx;
    ctx.sites = {2};
    auto w = spectrum::frequency_vector(ctx);
    double V0 = spectrum::v0(ctx);
    auto f0 = manufactured_perturbation(1, opt.Ncap, 1e-3, dio.gamma, opt.s0, 0.5, 0);
    auto st = transport_kam_step({V0, f0, 0, {}}, w, 4, dio, opt);
    auto rho = random_test_function(1, opt.Ncap, 3, 5);
    double res = transport_conjugation_residual(V0, f0, st.g, st.next.V, st.next.f, w, rho, opt.G);
    return {"", "", res <= 1e-10, Detail().num("conjugation_residual", res).num("tol", 1e-10).str()};
}

CheckResult csv_roundtrip() {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / ("qgvp_selftest_" + std::to_string(::getpid()) + ".csv");
    double x = 0.1 + 1e-17, y = -std::numbers::pi * 1e-300;
    io::write_csv(p, {"a", "b"}, {{x, y}});
    auto t = io::read_csv(p);
    fs::remove(p);
    bool exact = t.number(0, 0) == x && t.number(0, 1) == y;
    bool rejected = false;
    try {
        io::to_csv({"a"}, {{std::numeric_limits<double>::quiet_NaN()}});
    } catch (const std::invalid_argument&) {
        rejected = true;
    }
    return {"", "", exact && rejected, Detail().kv("bit_exact", exact).kv("nan_rejected", rejected).str()};
}

Check make(std::string id, std::string name, std::function<CheckResult()> f) {
    return {id, name, [id, name, f] {
                CheckResult r = f();
                r.id = id;
                r.name = name;
                return r;
            }};
}

}  // namespace

LinearizationCheck linearization_check(double lambda, int M, int n_dirs, const std::vector<double>& eps,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto r = base_curve(M);
    LinearizationCheck out;
    out.eps = eps;
    out.min_order = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_dirs; ++k) {
        auto rho = random_curve(M, 6, 0.5, rng);
        auto lin = contour::dF_apply(r, lambda, rho);
        std::vector<double> errs;
        for (double e : eps) {
            auto fd = contour::F_lambda(r + e * rho, lambda) - contour::F_lambda(r - e * rho, lambda);
            fd *= 0.5 / e;
            double err = max_abs_diff(fd, lin);
            errs.push_back(err);
            out.max_rel_error = std::max(out.max_rel_error, err / lin.max_abs());
        }
        out.min_order = std::min(out.min_order, fit_slope(eps, errs));
        out.errors.push_back(errs);
    }
    return out;
}

double gradient_identity_error(double lambda, double c, int n_tests, double fd_step, int M, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto r = base_curve(M);
    auto F = contour::F_lambda(r, lambda).grid();
    double worst = 0.0;
    for (int k = 0; k < n_tests; ++k) {
        auto h = random_curve(M, 6, 1.0, rng);
        auto dh = h.derivative();
        // <d_theta grad E, h> = -dE[r](h')
        double lhs = -(contour::energy(r + fd_step * dh, lambda) - contour::energy(r - fd_step * dh, lambda)) /
                     (2.0 * fd_step);
        double rhs = c * grid_inner(F, h.grid());
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
    }
    return worst;
}

CheckResult run_check(const Check& c) {
    auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
        r = c.run();
    } catch (const std::exception& e) {
        r.id = c.id;
        r.name = c.name;
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<Check> acceptance_suite(std::uint64_t seed) {
    return {
        make("1", "bessel cross-validation", [] { return bessel_cross(20, {0.1, 0.5, 1, 2, 5, 10}, 5.0); }),
        make("2", "small-lambda law", [] { return small_lambda(); }),
        make("3", "spectrum asymptotics", [] { return asymptotics(); }),
        make("4", "monotonicity of Omega_j/j", [] { return monotonicity({0.5, 1.0, 2.0}, 200); }),
        make("5", "non-degeneracy determinant", [seed] { return nondegeneracy(200, seed); }),
        make("6", "equilibrium functional", [] { return equilibrium(256); }),
        make("7", "linearization order", [seed] { return linearization(128, 20, seed); }),
        make("8", "hamiltonian gradient (d_theta grad E = -2F)", [seed] { return gradient(-2.0, 20, seed); }),
        make("9", "conservation and 4th order", [] { return conservation(); }),
        make("10", "reversibility", [] { return reversibility(1e-4, 1.0, 0.01); }),
        make("11", "transport homological residual", [seed] { return transport_residual(50, seed); }),
        make("12", "transport KAM decay", [seed] { return transport_decay(1, 4, seed); }),
        make("13", "remainder KAM", [] { return remainder_reduction(16, 8, 32, 3, 1e3); }),
        make("14", "cantor measure", [] { return cantor_measure(); }),
        make("15", "russmann sublevel", [] { return russmann(); }),
    };
}

std::vector<Check> selftest_suite(std::uint64_t seed) {
    return {
        make("bessel", "three I_jK_j routes agree", [] { return bessel_cross(8, {0.5, 2.0}, 5.0); }),
        make("small-lambda", "I_jK_j -> 1/(2j)", [] { return small_lambda(); }),
        make("monotone", "Omega_j/j increasing", [] { return monotonicity({1.0}, 64); }),
        make("det", "det B_d closed form", [seed] { return nondegeneracy(20, seed); }),
        make("equilibrium", "F[0] = 0", [] { return equilibrium(64); }),
        make("linearize", "linearization order", [seed] { return linearization(64, 3, seed); }),
        make("gradient", "d_theta grad E = 2F", [seed] { return gradient(2.0, 3, seed); }),
        make("reversible", "reversibility", [] { return reversibility(1e-4, 0.2, 0.02); }),
        make("homological", "transport homological residual", [seed] { return transport_residual(10, seed); }),
        make("conjugation", "one transport step conjugates", [] { return conjugation_step(); }),
        make("remainder", "remainder reduction", [] { return remainder_reduction(6, 4, 16, 2, 10.0); }),
        make("russmann", "sublevel measure of x^2", [] { return russmann(); }),
        make("csv", "CSV round trip", [] { return csv_roundtrip(); }),
    };
}

}  // namespace qgvp::checks
