#include "qgvp/bessel.hpp"
#include "qgvp/cantor.hpp"
#include "qgvp/checks.hpp"
#include "qgvp/contour.hpp"
#include "qgvp/dynamics.hpp"
#include "qgvp/io.hpp"
#include "qgvp/kam.hpp"
#include "qgvp/spectrum.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

using namespace qgvp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Params {
    double lambda = 1.0;
    double omega = 0.5;
    double gamma = 1e-4;
    double tau1 = 0.0;  // 0: d + 1/2
    double tau2 = 0.0;  // 0: d + 3/2
    double upsilon = 0.25;
    std::vector<int> sites;
    int grid = 0;       // 0: subcommand default
    double dt = 1e-3;
    double t_end = 1.0;
    int n0 = 4;
    int steps = 0;
    std::uint64_t seed = 0;
    std::string out = "out";
    int jmax = 0;
    int d = 1;
    double delta0 = 1e-3;
    // subcommand-specific extras
    int mode = 3;
    double amp = 1e-3;
    std::string curve;
    int record_every = 100;
    int dirs = 20;
    double eps = 1e-3;
    int ncap = 8;
    double lambda_lo = 0.5, lambda_hi = 2.0;
    int lmax = 8;
    std::vector<double> gammas{1e-2, 1e-3, 1e-4, 1e-5};
    std::vector<double> lambdas{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    bool timing = false;
};

class ConvergenceFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Records every registered flag so the manifest echoes the effective configuration.
struct Registry {
    std::map<std::string, std::map<std::string, std::function<json()>>> values;

    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& flag, T& ref, const std::string& help) {
        values[app->get_name()][flag] = [&ref] { return json(ref); };
        return app->add_option(flag, ref, help)->capture_default_str();
    }
    CLI::Option* add_list(CLI::App* app, const std::string& flag, auto& ref, const std::string& help) {
        values[app->get_name()][flag] = [&ref] { return json(ref); };
        return app->add_option(flag, ref, help)->delimiter(',')->capture_default_str();
    }
    json dump(const std::string& sub) const {
        json j = json::object();
        auto it = values.find(sub);
        if (it == values.end()) return j;
        for (const auto& [k, f] : it->second) j[k] = f();
        return j;
    }
};

void require_finite(const std::string& name, double v) {
    if (!std::isfinite(v)) throw std::invalid_argument(name + " must be finite");
}

cantor::DiophantineParams dio_from(const Params& p, int d) {
    auto dio = cantor::DiophantineParams::defaults(d);
    dio.gamma = p.gamma;
    if (p.tau1 != 0.0) dio.tau1 = p.tau1;
    if (p.tau2 != 0.0) dio.tau2 = p.tau2;
    dio.upsilon = p.upsilon;
    dio.N0 = p.n0;
    dio.validate(d);
    return dio;
}

spectrum::SpectrumContext ctx_from(const Params& p, std::vector<int> default_sites) {
    spectrum::SpectrumContext ctx;
    ctx.lambda = p.lambda;
    ctx.Omega = p.omega;
    ctx.sites = p.sites.empty() ? default_sites : p.sites;
    ctx.validate();
    return ctx;
}

struct Outputs {
    fs::path dir;
    std::vector<std::string> files;
    void csv(const std::string& name, const std::vector<std::string>& header, const std::vector<io::Row>& rows) {
        io::write_csv(dir / name, header, rows);
        files.push_back(name);
    }
    void js(const std::string& name, const json& j) {
        io::write_json(dir / name, j);
        files.push_back(name);
    }
};

void run_spectrum(const Params& p, Outputs& o) {
    int jmax = p.jmax ? p.jmax : 64;
    if (jmax < 1) throw std::invalid_argument("--jmax must be >= 1");
    auto ctx = ctx_from(p, {2, 3});
    std::vector<io::Row> rows;
    for (const auto& r : spectrum::asymptotic_residual(ctx, 1, jmax))
        rows.push_back({long(r.j), r.omega, r.residual, r.scaled});
    o.csv("spectrum.csv", {"j", "omega_j", "residual", "residual_j4"}, rows);
}

void run_evolve(const Params& p, Outputs& o) {
    FourierCurve r0;
    if (!p.curve.empty()) {
        r0 = io::curve_from_json(io::read_json(p.curve));
    } else {
        int M = p.grid ? p.grid : 256;
        if (M < 8 || M % 2) throw std::invalid_argument("--grid must be even and >= 8");
        if (p.mode < 1 || p.mode >= M / 2) throw std::invalid_argument("--mode out of range for the grid");
        r0 = FourierCurve::cosine(M, p.mode, p.amp);
    }
    spectrum::SpectrumContext ctx;
    ctx.lambda = p.lambda;
    ctx.Omega = p.omega;
    ctx.validate();
    dynamics::EvolutionConfig cfg;
    cfg.dt = p.dt;
    cfg.t_end = p.t_end;
    cfg.record_every = p.record_every;
    cfg.validate();
    dynamics::Trajectory tr;
    try {
        tr = dynamics::evolve(r0, p.lambda, p.omega, cfg);
    } catch (const dynamics::EvolutionError& e) {
        throw ConvergenceFailure(e.what());
    }
    std::vector<io::Row> rows;
    for (size_t k = 0; k < tr.snaps.size(); ++k) {
        const auto& s = tr.snaps[k];
        rows.push_back({s.t, s.E, s.J, s.mean});
        char name[64];
        std::snprintf(name, sizeof name, "curves/curve_%06zu.json", k);
        o.js(name, io::curve_to_json(s.r));
    }
    o.csv("trajectory.csv", {"t", "E", "J", "mean"}, rows);
    const auto& rep = tr.report;
    o.js("conservation.json", {{"drift_E", rep.drift_E}, {"drift_J", rep.drift_J}, {"drift_mean", rep.drift_mean}});
}

void run_linearize(const Params& p, Outputs& o) {
    int M = p.grid ? p.grid : 128;
    if (M < 16 || M % 2) throw std::invalid_argument("--grid must be even and >= 16");
    if (p.dirs < 1) throw std::invalid_argument("--dirs must be >= 1");
    std::vector<double> eps{1e-2, 1e-3, 1e-4};
    auto lc = checks::linearization_check(p.lambda, M, p.dirs, eps, p.seed);
    std::vector<io::Row> rows;
    for (size_t k = 0; k < lc.errors.size(); ++k)
        for (size_t e = 0; e < eps.size(); ++e) rows.push_back({long(k), eps[e], lc.errors[k][e]});
    o.csv("linearize.csv", {"direction", "eps", "error"}, rows);
    double plus = checks::gradient_identity_error(p.lambda, 2.0, p.dirs, 1e-5, std::min(M, 64), p.seed);
    double minus = checks::gradient_identity_error(p.lambda, -2.0, p.dirs, 1e-5, std::min(M, 64), p.seed);
    o.js("linearize.json", {{"min_order", lc.min_order},
                            {"max_rel_error", lc.max_rel_error},
                            {"gradient_rel_error_plus_2F", plus},
                            {"gradient_rel_error_minus_2F", minus}});
}

void run_kam_transport(const Params& p, Outputs& o) {
    int d = p.sites.empty() ? p.d : int(p.sites.size());
    if (!p.sites.empty() && p.d != d) throw std::invalid_argument("--d does not match the number of --sites");
    if (d < 1 || d > 2) throw std::invalid_argument("--d must be 1 or 2");
    auto dio = dio_from(p, d);
    auto ctx = ctx_from(p, d == 1 ? std::vector<int>{2} : std::vector<int>{2, 3});
    int steps = p.steps ? p.steps : 4;
    if (steps < 1) throw std::invalid_argument("--steps must be >= 1");
    if (!(p.delta0 > 0.0)) throw std::invalid_argument("--delta0 must be positive");
    auto opt = kam::TransportOptions::defaults(d);
    if (p.grid) {
        opt.G = p.grid;
        opt.fill(d);
    }
    auto w = spectrum::frequency_vector(ctx);
    auto f0 = kam::manufactured_perturbation(d, opt.Ncap, p.delta0, dio.gamma, opt.s0, 0.5, p.seed);
    kam::TransportRun run;
    try {
        run = kam::transport_kam_run(f0, spectrum::v0(ctx), w, dio, steps, opt, p.seed);
    } catch (const kam::KamError& e) {
        throw ConvergenceFailure(e.what());
    }
    json st = json::array();
    for (size_t k = 0; k + 1 < run.history.size(); ++k) {
        const auto& h = run.history[k];
        st.push_back({{"m", h.m},
                      {"N_m", h.N},
                      {"delta_s0", h.delta_s0},
                      {"delta_shigh", h.delta_shigh},
                      {"clipped_modes", h.clipped},
                      {"mean_f", h.mean_f},
                      {"straightening_residual", h.straightening_residual},
                      {"wallclock", p.timing ? h.wallclock : 0.0}});
    }
    const auto& fin = run.history.back();
    o.js("kam_transport.json", {{"d", d},
                                {"omega", w},
                                {"V0", spectrum::v0(ctx)},
                                {"s0", opt.s0},
                                {"s_high", opt.s_high},
                                {"N_cap", opt.Ncap},
                                {"grid", opt.G},
                                {"steps", st},
                                {"final", {{"m", fin.m},
                                           {"delta_s0", fin.delta_s0},
                                           {"delta_shigh", fin.delta_shigh},
                                           {"straightening_residual", fin.straightening_residual},
                                           {"c", run.c}}}});
}

void run_kam_remainder(const Params& p, Outputs& o) {
    if (p.sites.size() > 1) throw std::invalid_argument("kam-remainder takes a single site (d = 1)");
    int j1 = p.sites.empty() ? 2 : p.sites[0];
    int jmax = p.jmax ? p.jmax : 16;
    int M = p.grid ? p.grid : 64;
    int steps = p.steps ? p.steps : 3;
    if (steps < 1) throw std::invalid_argument("--steps must be >= 1");
    if (!(p.eps > 0.0 && p.eps < 0.25)) throw std::invalid_argument("--eps must lie in (0, 1/4)");
    if (p.ncap < 1) throw std::invalid_argument("--ncap must be >= 1");
    auto dio = dio_from(p, 1);
    spectrum::SpectrumContext ctx;
    ctx.lambda = p.lambda;
    ctx.Omega = p.omega;
    ctx.validate();
    auto cr = kam::remainder_from_contour(p.lambda, p.omega, j1, p.eps, jmax, p.ncap, M, std::max(32, 2 * p.ncap + 2));
    double s0 = std::ceil(1.0 + 2.0);
    kam::RemainderRun run;
    try {
        run = kam::remainder_kam_run(cr.mu0, cr.R0, cr.omega, dio, steps, s0);
    } catch (const kam::KamError& e) {
        throw ConvergenceFailure(e.what());
    }
    json st = json::array();
    for (const auto& h : run.history)
        st.push_back({{"m", h.m},
                      {"N_m", h.N},
                      {"offdiag_s0", h.offdiag_s0},
                      {"psi_norm", h.psi_norm},
                      {"clipped_modes", h.clipped},
                      {"symmetry_defect", h.symmetry_defect},
                      {"wallclock", p.timing ? h.wallclock : 0.0}});
    o.js("kam_remainder.json", {{"omega", cr.omega}, {"j1", j1}, {"eps", p.eps}, {"s0", s0}, {"steps", st}});
    std::vector<io::Row> rows;
    for (auto [j, mu] : run.mu_inf) {
        double r = mu - cr.mu0.at(j);
        rows.push_back({long(j), cr.mu0.at(j), mu, r, j * r});
    }
    o.csv("remainder_spectrum.csv", {"j", "mu0", "mu_inf", "r_inf", "j_r_inf"}, rows);
}

void run_cantor(const Params& p, Outputs& o) {
    auto ctx = ctx_from(p, {2, 3});
    int d = int(ctx.sites.size());
    double tau1 = p.tau1 != 0.0 ? p.tau1 : d + 0.5;
    int grid = p.grid ? p.grid : 20000;
    auto rep = cantor::resonant_complement_measure(ctx, p.lambda_lo, p.lambda_hi, grid, p.gammas, tau1, p.lmax);
    json res = json::array();
    std::vector<io::Row> rows;
    for (size_t k = 0; k < rep.gamma_values.size(); ++k) {
        json ls = json::array();
        for (const auto& l : rep.resonant_l[k]) ls.push_back(l);
        res.push_back({{"gamma", rep.gamma_values[k]},
                       {"complement_measure", rep.complement_measure[k]},
                       {"sum_of_measures", rep.sum_of_measures[k]},
                       {"resonant_l", ls}});
        for (const auto& iv : rep.intervals[k]) rows.push_back({rep.gamma_values[k], iv.lo, iv.hi});
    }
    json fe = std::isfinite(rep.fitted_exponent) ? json(rep.fitted_exponent) : json(nullptr);
    o.js("cantor_measure.json", {{"sites", ctx.sites},
                                 {"lambda_lo", rep.lambda_lo},
                                 {"lambda_hi", rep.lambda_hi},
                                 {"grid_resolution", rep.grid_resolution},
                                 {"lmax", rep.lmax},
                                 {"tau1", tau1},
                                 {"fitted_exponent", fe},
                                 {"per_gamma", res}});
    o.csv("cantor_intervals.csv", {"gamma", "interval_lo", "interval_hi"}, rows);
}

void run_bessel(const Params& p, Outputs& o) {
    int jmax = p.jmax ? p.jmax : 20;
    if (jmax < 1) throw std::invalid_argument("--jmax must be >= 1");
    std::vector<io::Row> rows;
    for (double lam : p.lambdas) {
        if (!(lam > 0.0)) throw std::invalid_argument("--lambdas must be positive");
        for (int j = 1; j <= jmax; ++j)
            rows.push_back({long(j), lam, bessel::I(j, lam), bessel::K(j, lam), bessel::product_IK(j, lam),
                            bessel::product_IK_nicholson(j, lam), bessel::product_IK_laplace(j, lam)});
    }
    o.csv("bessel_table.csv", {"j", "lambda", "I_j", "K_j", "IK", "IK_nicholson", "IK_laplace"}, rows);
}

int run_selftest(const Params& p, Outputs& o) {
    json res = json::array();
    bool all = true;
    for (const auto& c : checks::selftest_suite(p.seed)) {
        auto r = checks::run_check(c);
        all = all && r.pass;
        std::printf("%s %s: %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(), r.detail.c_str());
        res.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    }
    o.js("selftest.json", {{"all_pass", all}, {"checks", res}});
    return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasi-geostrophic vortex patch toolkit"};
    app.require_subcommand(1);
    Params p;
    Registry reg;
    std::string chosen;

    auto common = [&](CLI::App* s) {
        reg.add(s, "--out", p.out, "output directory");
        reg.add(s, "--seed", p.seed, "random seed");
    };
    auto physics = [&](CLI::App* s) {
        reg.add(s, "--lambda", p.lambda, "Rossby deformation parameter");
        reg.add(s, "--omega", p.omega, "angular velocity of the rotating frame");
    };
    auto dio = [&](CLI::App* s) {
        reg.add(s, "--gamma", p.gamma, "Diophantine constant");
        reg.add(s, "--tau1", p.tau1, "first-Melnikov exponent (0: d + 1/2)");
        reg.add(s, "--tau2", p.tau2, "second-Melnikov exponent (0: d + 3/2)");
        reg.add(s, "--upsilon", p.upsilon, "exponent of gamma in the transport cut-off");
        reg.add(s, "--n0", p.n0, "initial truncation N0");
        reg.add(s, "--steps", p.steps, "number of KAM steps (0: default)");
    };

    auto* sp = app.add_subcommand("spectrum", "eigenvalue table and asymptotic residuals");
    physics(sp);
    common(sp);
    reg.add_list(sp, "--sites", p.sites, "tangential sites, comma separated");
    reg.add(sp, "--jmax", p.jmax, "largest mode (0: 64)");

    auto* ev = app.add_subcommand("evolve", "time integration of the contour equation");
    physics(ev);
    common(ev);
    reg.add(ev, "--grid", p.grid, "grid size M (0: 256)");
    reg.add(ev, "--dt", p.dt, "time step");
    reg.add(ev, "--t-end", p.t_end, "final time");
    reg.add(ev, "--mode", p.mode, "mode of the initial cosine");
    reg.add(ev, "--amp", p.amp, "amplitude of the initial cosine");
    reg.add(ev, "--curve", p.curve, "initial curve JSON (overrides --mode/--amp/--grid)");
    reg.add(ev, "--record-every", p.record_every, "snapshot cadence in steps");

    auto* li = app.add_subcommand("linearize-check", "finite-difference checks of the linearized operator");
    physics(li);
    common(li);
    reg.add(li, "--grid", p.grid, "grid size M (0: 128)");
    reg.add(li, "--dirs", p.dirs, "number of random directions");

    auto* kt = app.add_subcommand("kam-transport", "KAM reduction of the transport operator");
    physics(kt);
    common(kt);
    dio(kt);
    reg.add_list(kt, "--sites", p.sites, "tangential sites (default 2 for d=1, 2,3 for d=2)");
    reg.add(kt, "--d", p.d, "torus dimension");
    reg.add(kt, "--delta0", p.delta0, "initial smallness delta0");
    reg.add(kt, "--grid", p.grid, "collocation grid per dimension (0: default)");
    kt->add_flag("--timing", p.timing, "record wallclock times (makes output non-reproducible)");
    reg.values["kam-transport"]["--timing"] = [&] { return json(p.timing); };

    auto* kr = app.add_subcommand("kam-remainder", "KAM reduction of the zero-order remainder");
    physics(kr);
    common(kr);
    dio(kr);
    reg.add_list(kr, "--sites", p.sites, "excited site j1 (default 2)");
    reg.add(kr, "--eps", p.eps, "torus amplitude");
    reg.add(kr, "--jmax", p.jmax, "largest normal mode (0: 16)");
    reg.add(kr, "--ncap", p.ncap, "largest |p| kept in the Toeplitz blocks");
    reg.add(kr, "--grid", p.grid, "contour grid M (0: 64)");
    kr->add_flag("--timing", p.timing, "record wallclock times (makes output non-reproducible)");
    reg.values["kam-remainder"]["--timing"] = [&] { return json(p.timing); };

    auto* cm = app.add_subcommand("cantor-measure", "measure of the resonant parameter set");
    physics(cm);
    common(cm);
    reg.add_list(cm, "--sites", p.sites, "tangential sites (default 2,3)");
    reg.add(cm, "--tau1", p.tau1, "Diophantine exponent (0: d + 1/2)");
    reg.add(cm, "--grid", p.grid, "lambda grid points (0: 20000)");
    reg.add(cm, "--lambda-lo", p.lambda_lo, "lower end of the lambda interval");
    reg.add(cm, "--lambda-hi", p.lambda_hi, "upper end of the lambda interval");
    reg.add(cm, "--lmax", p.lmax, "largest |l|_1");
    reg.add_list(cm, "--gammas", p.gammas, "gamma values, comma separated");

    auto* bt = app.add_subcommand("bessel-table", "I_j, K_j and I_jK_j by three routes");
    common(bt);
    reg.add(bt, "--jmax", p.jmax, "largest order (0: 20)");
    reg.add_list(bt, "--lambdas", p.lambdas, "lambda values, comma separated");

    auto* st = app.add_subcommand("selftest", "run the fast invariant suite");
    common(st);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    for (auto* s : app.get_subcommands()) chosen = s->get_name();

    Outputs o;
    o.dir = p.out;
    int code = 0;
    std::string error;
    try {
        for (auto [name, v] : std::map<std::string, double>{{"--lambda", p.lambda},
                                                            {"--omega", p.omega},
                                                            {"--gamma", p.gamma},
                                                            {"--dt", p.dt},
                                                            {"--t-end", p.t_end},
                                                            {"--delta0", p.delta0},
                                                            {"--eps", p.eps},
                                                            {"--amp", p.amp}})
            require_finite(name, v);
        fs::create_directories(o.dir);
        if (chosen == "spectrum") run_spectrum(p, o);
        else if (chosen == "evolve") run_evolve(p, o);
        else if (chosen == "linearize-check") run_linearize(p, o);
        else if (chosen == "kam-transport") run_kam_transport(p, o);
        else if (chosen == "kam-remainder") run_kam_remainder(p, o);
        else if (chosen == "cantor-measure") run_cantor(p, o);
        else if (chosen == "bessel-table") run_bessel(p, o);
        else if (chosen == "selftest") code = run_selftest(p, o);
    } catch (const ConvergenceFailure& e) {
        code = 2;
        error = e.what();
    } catch (const std::invalid_argument& e) {
        code = 1;
        error = e.what();
    } catch (const std::domain_error& e) {
        code = 1;
        error = e.what();
    } catch (const std::out_of_range& e) {
        code = 1;
        error = e.what();
    } catch (const fs::filesystem_error& e) {
        code = 1;
        error = e.what();
    } catch (const json::exception& e) {
        code = 1;
        error = e.what();
    } catch (const std::exception& e) {
        code = 2;
        error = e.what();
    }
    if (!error.empty()) std::cerr << "error: " << error << "\n";

    try {
        json m = {{"subcommand", chosen}, {"flags", reg.dump(chosen)}, {"outputs", o.files}, {"exit_code", code}};
        if (!error.empty()) m["error"] = error;
        io::write_json(o.dir / "run-manifest.json", m);
    } catch (const std::exception& e) {
        std::cerr << "error: cannot write run-manifest.json: " << e.what() << "\n";
        if (code == 0) code = 1;
    }
    return code;
}
