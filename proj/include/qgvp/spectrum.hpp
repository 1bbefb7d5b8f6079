#pragma once

#include "qgvp/bessel.hpp"

#include <array>
#include <string>
#include <vector>

namespace qgvp::spectrum {

struct SpectrumContext {
    double lambda = 1.0;
    double Omega = 0.5;
    std::vector<int> sites{2, 3};
    double lambda_min = 0.0;    // open interval (lambda_min, lambda_max)
    double lambda_max = 1.0e4;
    bessel::Policy policy{};

    void validate() const;
    SpectrumContext with_lambda(double l) const;
};

double omega_j(const SpectrumContext& ctx, int j);
double v0(const SpectrumContext& ctx);
std::vector<double> frequency_vector(const SpectrumContext& ctx);

// q-th lambda derivative of I_j K_j; Laplace form when 2j > q, Leibniz form otherwise.
double ik_deriv(int j, double lambda, int q, const bessel::Policy& p = bessel::default_policy());
// q-th lambda derivative of Omega_j.
double omega_j_deriv(const SpectrumContext& ctx, int j, int q);

struct AsymRow {
    int j;
    double omega;
    double residual;   // Omega_j - V0 j + 1/2 - lambda^2/(4 j^2)
    double scaled;     // residual * j^4
};
std::vector<AsymRow> asymptotic_residual(const SpectrumContext& ctx, int jlo, int jhi);

// prod_{k<l} (mu_{j_l} - mu_{j_k}), mu_j = 4 j^2.
double nondegeneracy_det(const std::vector<int>& sites);
// det (Q_m(mu_{j_k}))_{m,k} by LU.
double nondegeneracy_det_bruteforce(const std::vector<int>& sites);
// Q_1 = 1, Q_m(X) = prod_{l=2}^m (X - (2l-1)^2).
double Q_poly(int m, double X);

enum class TransversalityMode { PureFrequency, PlusI1K1, PlusOmegaJ, Difference };
std::string mode_name(TransversalityMode m);

struct TransversalityReport {
    TransversalityMode mode = TransversalityMode::PureFrequency;
    double rho0_estimate = 0.0;
    int q0_used = 0;
    std::vector<int> worst_l;
    int worst_j = 0, worst_j0 = 0, worst_sign = 1;
    double worst_lambda = 0.0;
    long n_tuples = 0;
};

struct TransversalityScan {
    std::array<TransversalityReport, 4> cases;
    double rho0_estimate = 0.0;          // min over the four cases
    double fd_max_discrepancy = 0.0;     // analytic vs central-difference derivatives
    int lambda_points = 0;
};

// Scans cases (i)-(iv) over the given lambda grid, l with |l|_1 <= lmax, j, j0 <= jmax.
// Throws std::runtime_error if some case yields a non-positive estimate.
TransversalityScan transversality_scan(const SpectrumContext& ctx, const std::vector<double>& lambdas,
                                       int lmax, int jmax, int q0, double fd_step);

// All l in Z^d with 1 <= |l|_1 <= lmax, lexicographic; if half, only those with positive
// leading nonzero entry.
std::vector<std::vector<int>> enumerate_l(int d, int lmax, bool half);
double bracket(const std::vector<int>& l);  // max(1, |l|_1)

}  // namespace qgvp::spectrum
