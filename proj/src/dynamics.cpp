#include "qgvp/dynamics.hpp"

#include "qgvp/contour.hpp"
#include "qgvp/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace qgvp::dynamics {

void EvolutionConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be positive");
    if (dt > t_end) throw std::invalid_argument("dt must not exceed t_end");
    if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
}

FourierCurve rhs(const FourierCurve& r, double lambda, double Omega) {
    FourierCurve out = contour::F_lambda(r, lambda);
    out *= -1.0;
    FourierCurve d = r.derivative();
    d *= Omega;
    return out - d;
}

bool cfl_ok(const FourierCurve& r, double lambda, double Omega, double dt) {
    auto V = contour::V_r(r, lambda, Omega);
    double vmax = 0.0;
    for (double v : V) vmax = std::max(vmax, std::abs(v));
    return dt * vmax <= 0.5 * 2.0 * std::numbers::pi / r.grid_size();
}

namespace {

double grid_mean(const FourierCurve& r) {
    auto g = r.grid();
    double s = 0.0;
    for (double v : g) s += v;
    return s / double(g.size());
}

Snapshot snap(double t, const FourierCurve& r, double lambda, bool energy) {
    Snapshot s{t, r, 0.0, 0.0, grid_mean(r)};
    if (energy) {
        s.E = contour::energy(r, lambda);
        s.J = contour::angular_impulse(r);
    }
    return s;
}

FourierCurve rk4_step(const FourierCurve& r, double lambda, double Omega, double dt) {
    FourierCurve k1 = rhs(r, lambda, Omega);
    FourierCurve k2 = rhs(r + (0.5 * dt) * k1, lambda, Omega);
    FourierCurve k3 = rhs(r + (0.5 * dt) * k2, lambda, Omega);
    FourierCurve k4 = rhs(r + dt * k3, lambda, Omega);
    FourierCurve s = k1 + 2.0 * k2;
    s += 2.0 * k3;
    s += k4;
    return r + (dt / 6.0) * s;
}

}  // namespace

Trajectory evolve(const FourierCurve& r0, double lambda, double Omega, const EvolutionConfig& cfg) {
    cfg.validate();
    contour::check_curve(r0);
    if (!cfl_ok(r0, lambda, Omega, cfg.dt)) throw std::invalid_argument("evolve: CFL guard violated at t = 0");
    long n = std::lround(cfg.t_end / cfg.dt);
    if (std::abs(n * cfg.dt - cfg.t_end) > 1e-9 * cfg.t_end)
        throw std::invalid_argument("evolve: t_end must be an integer multiple of dt");

    Trajectory tr;
    FourierCurve r = r0;
    tr.snaps.push_back(snap(0.0, r, lambda, cfg.monitor_energy));
    for (long k = 1; k <= n; ++k) {
        r = rk4_step(r, lambda, Omega, cfg.dt);
        double m = r.max_abs();
        if (!std::isfinite(m)) throw EvolutionError("evolve: non-finite state at step " + std::to_string(k));
        if (!(m < 0.5)) throw EvolutionError("evolve: smallness guard breached at step " + std::to_string(k));
        if (k % cfg.record_every == 0 || k == n) tr.snaps.push_back(snap(k * cfg.dt, r, lambda, cfg.monitor_energy));
    }

    auto& rep = tr.report;
    const auto& s0 = tr.snaps.front();
    for (const auto& s : tr.snaps) {
        if (cfg.monitor_energy) {
            rep.drift_E = std::max(rep.drift_E, std::abs(s.E - s0.E) / std::abs(s0.E));
            rep.drift_J = std::max(rep.drift_J, std::abs(s.J - s0.J) / std::abs(s0.J));
        }
        rep.drift_mean = std::max(rep.drift_mean, std::abs(s.mean));
    }
    return tr;
}

FourierCurve linear_flow(double lambda, double Omega, const std::map<int, double>& amplitudes, double t, int M) {
    spectrum::SpectrumContext ctx;
    ctx.lambda = lambda;
    ctx.Omega = Omega;
    FourierCurve r(M);
    for (auto [j, a] : amplitudes) {
        if (j < 1 || j >= M / 2) throw std::invalid_argument("linear_flow: mode outside grid range");
        r += FourierCurve::cosine(M, j, a, spectrum::omega_j(ctx, j) * t);
    }
    return r;
}

double reversibility_check(const FourierCurve& r0_even, double lambda, double Omega, const EvolutionConfig& cfg) {
    if (max_abs_diff(r0_even, r0_even.reflected()) > 1e-14 * std::max(1.0, r0_even.max_abs()))
        throw std::invalid_argument("reversibility_check: initial curve must be even");
    EvolutionConfig c = cfg;
    c.monitor_energy = false;
    c.record_every = std::numeric_limits<int>::max();
    FourierCurve rT = evolve(r0_even, lambda, Omega, c).final_state();
    // s(t, theta) = r(T - t, -theta) is again a solution, so s(T) = r0(-theta) = r0
    FourierCurve back = evolve(rT.reflected(), lambda, Omega, c).final_state();
    return max_abs_diff(back, r0_even);
}

RichardsonResult richardson(const FourierCurve& r0, double lambda, double Omega, double dt, double t_end) {
    auto run = [&](double h) {
        EvolutionConfig c;
        c.dt = h;
        c.t_end = t_end;
        c.monitor_energy = false;
        c.record_every = std::numeric_limits<int>::max();
        return evolve(r0, lambda, Omega, c).final_state();
    };
    FourierCurve ref = run(dt / 4.0);
    double e1 = max_abs_diff(run(dt), ref);
    double e2 = max_abs_diff(run(dt / 2.0), ref);
    return {e1, e2, e1 / e2};
}

}  // namespace qgvp::dynamics
