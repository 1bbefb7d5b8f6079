#pragma once

#include <vector>

namespace qgvp::bessel {

// Evaluation knobs; defaults are engineering choices.
struct Policy {
    int series_terms = 60;              // minimum terms in power series
    int quad_nodes = 128;               // Nicholson: 4 panels worth of GL nodes per dyadic panel group
    double crossover_large_lambda = 15.0;
    double small_x_cutoff = 0.5;        // below this, f and g use their series

    void validate() const;
};

const Policy& default_policy();

// Euler's constant and digamma at positive integers, psi(n) = H_{n-1} - gamma.
inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;
double digamma_int(int n);

// Bessel J_n for small integer order (n <= 8).
double J(int n, double x);
double J0(double x);
// (1/pi) int_0^pi cos(x sin t) dt by the periodic trapezoid rule on `nodes` points.
double J0_quadrature(double x, int nodes);
// q-th derivative of J0, via J0^(q) = 2^-q sum_k (-1)^k C(q,k) J_{2k-q}.
double J0_deriv(int q, double x);

double log_I(int j, double z, const Policy& p = default_policy());
double I(int j, double z, const Policy& p = default_policy());

double log_K(int j, double z, const Policy& p = default_policy());
double K(int j, double z, const Policy& p = default_policy());
// The two independent evaluation paths behind K.
double K_series(int j, double z);
double K_integral(int j, double z);

// I_j(lambda) K_j(lambda), routed.
double product_IK(int j, double lambda, const Policy& p = default_policy());
// exp(log I + log K), no asymptotics.
double product_IK_direct(int j, double lambda, const Policy& p = default_policy());
// Nicholson's integral, (2/pi) int_0^{pi/2} K0(2 lambda sin u) cos(2 j u) du.
double product_IK_nicholson(int j, double lambda, const Policy& p = default_policy());
// Laplace-type integral, 1/2 int_0^inf J0(2 lambda sinh(t/2)) e^{-jt} dt.
double product_IK_laplace(int j, double lambda, const Policy& p = default_policy());

// q-th lambda derivative from the differentiated Laplace integral. Requires 2j > q.
double product_IK_deriv(int j, double lambda, int q, const Policy& p = default_policy());
// Same derivative from the Leibniz rule and the I/K derivative recurrences; any j.
double product_IK_deriv_leibniz(int j, double lambda, int q, const Policy& p = default_policy());

double product_IK_asym_lambda(int j, double lambda, int N);
double product_IK_asym_j(int j, double lambda, int M);

struct AsymptoticCoeffs {
    int jmax = 0, mmax = 0;
    std::vector<std::vector<double>> alpha;   // alpha[j][m], m = 0..mmax (alpha[j][0] = 1)
    std::vector<std::vector<double>> b_poly;  // b_poly[m][k]: coefficient of (lambda^2)^k in b_m
    std::vector<std::vector<double>> stirling; // S(m,k)
};
AsymptoticCoeffs asymptotic_coeffs(int jmax, int mmax);

double stirling2(int m, int k);
double alpha_coeff(int j, int m);
double b_coeff(int m, double lambda);

// Anti-derivative kernels of the energy functional.
double kernel_f(double x, const Policy& p = default_policy());
double kernel_f_series(double x);
double kernel_f_direct(double x);
double kernel_g(double x, const Policy& p = default_policy());
double kernel_g_series(double x);
double kernel_g_direct(double x);

}  // namespace qgvp::bessel
