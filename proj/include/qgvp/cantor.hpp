#pragma once

#include "qgvp/spectrum.hpp"

#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace qgvp::cantor {

struct DiophantineParams {
    double gamma = 1e-4;
    double tau1 = 1.5;
    double tau2 = 2.5;
    double upsilon = 0.25;
    int q0 = 2;
    int N0 = 4;

    // tau2 > tau1 > d, upsilon <= 1/(q0+2), N0 >= 4
    void validate(int d) const;
    static DiophantineParams defaults(int d);
};

// Even cut-off: 0 on |x| <= 1/3, 1 on |x| >= 1/2, quintic smoothstep (C^2) in between.
double chi(double x);

double bracket(const std::vector<int>& l);  // max(1, |l|_1)
inline double bracket_j(int j) { return j == 0 ? 1.0 : double(j < 0 ? -j : j); }
double dot(const std::vector<double>& w, const std::vector<int>& l);

bool first_melnikov_ok(const std::vector<double>& omega, double c, const std::vector<int>& l, int j,
                       const DiophantineParams& dio);
// mu maps mode -> eigenvalue; missing modes are an error.
bool second_melnikov_ok(const std::vector<double>& omega, const std::map<int, double>& mu,
                        const std::vector<int>& l, int j, int j0, const DiophantineParams& dio);
// |omega . l| > gamma / <l>^tau1
bool diophantine_ok(const std::vector<double>& omega, const std::vector<int>& l, const DiophantineParams& dio);

struct Interval {
    double lo, hi;
};

// Sublevel set {x in [a,b] : |f(x)| <= alpha} from an n-point grid with bisection refinement of
// every crossing of f = +-alpha (tolerance tol in x).
std::vector<Interval> sublevel_set(const std::function<double(double)>& f, double a, double b, int n, double alpha,
                                   double tol = 1e-13);
// Same, reusing grid samples fx[i] = f(a + i (b-a)/(n-1)).
std::vector<Interval> sublevel_set(const std::function<double(double)>& f, const std::vector<double>& fx, double a,
                                   double b, double alpha, double tol = 1e-13);
double measure(const std::vector<Interval>& iv);
std::vector<Interval> merge(std::vector<Interval> iv);

struct MeasureReport {
    std::vector<double> gamma_values;
    std::vector<double> complement_measure;
    std::vector<double> sum_of_measures;                   // sum_l |R_l|, for the additivity bound
    std::vector<std::vector<Interval>> intervals;          // per gamma, merged
    std::vector<std::vector<std::vector<int>>> resonant_l; // per gamma, l with nonempty R_l
    double fitted_exponent = 0.0;                          // slope of log measure vs log gamma
    int grid_resolution = 0;
    double lambda_lo = 0.0, lambda_hi = 0.0;
    int lmax = 0;
};

// |union_{1 <= |l|_1 <= lmax} R_l|, R_l = {lambda : |omega_Eq(lambda) . l| <= gamma/<l>^tau1}, for each gamma.
MeasureReport resonant_complement_measure(const spectrum::SpectrumContext& base, double lambda_lo, double lambda_hi,
                                          int grid, const std::vector<double>& gammas, double tau1, int lmax);

struct RussmannResult {
    bool hypothesis_ok = false;       // max_k |f^(k)| >= beta at every grid point
    double min_max_derivative = 0.0;
    std::vector<double> alphas;
    std::vector<double> measures;
    double fitted_C = 0.0;            // max_alpha measure / alpha^{1/q0}
    double fitted_exponent = 0.0;     // log-log slope of measure vs alpha
    bool bound_ok = false;            // measure <= C alpha^{1/q0} / beta^{1+1/q0} with the fitted C
};

// derivs[k] = f^(k) for k = 0..q0 (derivs[0] = f).
RussmannResult russmann_check(const std::vector<std::function<double(double)>>& derivs, double a, double b, int n,
                              const std::vector<double>& alphas, double beta);

}  // namespace qgvp::cantor
