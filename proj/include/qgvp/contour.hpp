#pragma once

#include "qgvp/fourier.hpp"

#include <Eigen/Dense>

#include <vector>

namespace qgvp::contour {

// Rejects curves violating max|r| < 1/2 or with spectral energy above 1e-8 in the top octave.
void check_curve(const FourierCurve& r);

std::vector<double> radius_from_r(const FourierCurve& r);
// |R(theta) e^{i theta} - R(eta) e^{i eta}| in the symmetric form.
double chord(const FourierCurve& r, double theta, double eta);

// Log weights: int log|sin((eta - theta)/2)| phi(eta) deta ~ sum_n w[(n - m) mod M] phi_n.
const std::vector<double>& log_weights(int M);
// Circulant coefficients of K0(2 lambda |sin(./2)|), built from the multipliers I_j K_j.
const std::vector<double>& log_part_circulant(int M, double lambda);

// Splitting K0(lambda A_r) = K0(2 lambda |s|) + script_K smooth1 + smooth2, s = sin((eta - theta)/2),
// on all node pairs (rows theta_m, columns eta_n).
struct KernelSplit {
    int M = 0;
    double lambda = 0.0;
    Eigen::MatrixXd log_part;   // K0(2 lambda |s|), diagonal left at 0
    Eigen::MatrixXd script_K;   // s^2 log|s|, diagonal 0
    Eigen::MatrixXd smooth1;
    Eigen::MatrixXd smooth2;
    Eigen::MatrixXd chord;      // A_r
};
KernelSplit kernel_split(const FourierCurve& r, double lambda);
// max over off-diagonal pairs of |K0(lambda A) - (log_part + script_K smooth1 + smooth2)|
double reconstruction_residual(const KernelSplit& ks);

// Quadrature matrix Q with int K0(lambda A_r(theta_m, eta)) phi(eta) deta ~ (Q phi)_m.
Eigen::MatrixXd kernel_matrix(const KernelSplit& ks);

// Geometry on the grid.
struct Geometry {
    std::vector<double> R, dR, theta;
};
Geometry geometry(const FourierCurve& r);

// All grid-level pieces needed by F, V_r and L_r, built once per curve.
class Linearization {
public:
    Linearization(const FourierCurve& r, double lambda);
    const Eigen::MatrixXd& L() const { return Q_; }
    std::vector<double> F_grid() const;
    std::vector<double> V(double Omega) const;
    const Geometry& geom() const { return g_; }

private:
    int M_;
    double lambda_;
    Geometry g_;
    Eigen::MatrixXd Q_;
};

FourierCurve F_lambda(const FourierCurve& r, double lambda);
std::vector<double> V_r(const FourierCurve& r, double lambda, double Omega);
std::vector<double> L_r_apply(const FourierCurve& r, double lambda, const std::vector<double>& rho);
// d_theta(-V_r rho + L_r rho)
FourierCurve linearized_apply(const FourierCurve& r, double lambda, double Omega, const FourierCurve& rho);
// directional derivative of F in direction rho, from the same pieces: -Omega rho' - linearized_apply
FourierCurve dF_apply(const FourierCurve& r, double lambda, const FourierCurve& rho);

double angular_impulse(const FourierCurve& r);
double energy(const FourierCurve& r, double lambda);
double hamiltonian(const FourierCurve& r, double lambda, double Omega);

}  // namespace qgvp::contour
