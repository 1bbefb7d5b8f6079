#pragma once

#include "qgvp/fourier.hpp"

#include <map>
#include <stdexcept>
#include <vector>

namespace qgvp::dynamics {

struct EvolutionConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    int record_every = 1;
    bool monitor_energy = true;   // E and J at every record

    void validate() const;
};

struct ConservationReport {
    double drift_E = 0.0, drift_J = 0.0, drift_mean = 0.0;
    double reversibility_defect = 0.0;
};

struct Snapshot {
    double t;
    FourierCurve r;
    double E, J, mean;
};

struct Trajectory {
    std::vector<Snapshot> snaps;
    ConservationReport report;
    const FourierCurve& final_state() const { return snaps.back().r; }
};

class EvolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// -Omega r' - F_lambda[r]
FourierCurve rhs(const FourierCurve& r, double lambda, double Omega);

// dt * max|V_r| <= 0.5 * 2 pi / M at r
bool cfl_ok(const FourierCurve& r, double lambda, double Omega, double dt);

Trajectory evolve(const FourierCurve& r0, double lambda, double Omega, const EvolutionConfig& cfg);

// sum_j a_j cos(j theta - Omega_j t) on an M-point grid
FourierCurve linear_flow(double lambda, double Omega, const std::map<int, double>& amplitudes, double t, int M);

// Evolve r0 (even) to T, reflect theta, evolve T again; sup distance to r0.
double reversibility_check(const FourierCurve& r0_even, double lambda, double Omega, const EvolutionConfig& cfg);

// Terminal-state errors at dt and dt/2 against a dt/4 reference; returns {err_dt, err_dt2, ratio}.
struct RichardsonResult {
    double err_dt, err_half, ratio;
};
RichardsonResult richardson(const FourierCurve& r0, double lambda, double Omega, double dt, double t_end);

}  // namespace qgvp::dynamics
