#pragma once

#include "qgvp/cantor.hpp"
#include "qgvp/fourier.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace qgvp::kam {

using cantor::DiophantineParams;

class KamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// <l, j> = max(1, |l|_1, |j|)
int bracket_lj(const std::vector<int>& l, int j);

// Real function on T^{d+1} (phi in T^d, theta in T), Fourier modes with <l, j> <= N_cap, stored in a dense box.
class TorusFunction {
public:
    TorusFunction() = default;
    TorusFunction(int d, int Ncap);

    int d() const { return d_; }
    int Ncap() const { return N_; }
    size_t size() const { return c_.size(); }

    bool in_range(const std::vector<int>& l, int j) const;
    cplx get(const std::vector<int>& l, int j) const;  // zero outside the mask
    void set(const std::vector<int>& l, int j, cplx v);
    // raw access by box index; decode gives (l, j) for an index
    cplx& at(size_t k) { return c_[k]; }
    cplx at(size_t k) const { return c_[k]; }
    void decode(size_t k, std::vector<int>& l, int& j) const;
    bool masked(size_t k) const { return mask_[k]; }
    size_t index(const std::vector<int>& l, int j) const;

    double mean() const;
    double sobolev_norm(double s) const;
    double sup_coeff() const;
    TorusFunction d_theta() const;
    TorusFunction omega_d_phi(const std::vector<double>& omega) const;
    TorusFunction project(int N) const;        // keep <l,j> <= N
    TorusFunction project_perp(int N) const;   // keep <l,j> > N
    // max |f_{-l,-j} - conj f_{l,j}|
    double reality_defect() const;
    // parity = +1: f_{-l,-j} = f_{l,j}; parity = -1: f_{-l,-j} = -f_{l,j}
    double parity_defect(int parity) const;

    // Values on the G^{d+1} grid, theta the fastest index. G must exceed 2 N_cap.
    std::vector<double> grid(int G) const;
    static TorusFunction from_grid(int d, int Ncap, int G, const std::vector<double>& v);
    // Fraction of spectral energy of grid values beyond the mask (aliasing/truncation monitor).
    static double tail_fraction(int d, int Ncap, int G, const std::vector<double>& v);

    TorusFunction& operator+=(const TorusFunction& o);
    TorusFunction& operator-=(const TorusFunction& o);
    TorusFunction& operator*=(double a);
    friend TorusFunction operator+(TorusFunction a, const TorusFunction& b) { return a += b; }
    friend TorusFunction operator-(TorusFunction a, const TorusFunction& b) { return a -= b; }
    friend TorusFunction operator*(double s, TorusFunction a) { return a *= s; }

private:
    int d_ = 0, N_ = 0, W_ = 0;
    std::vector<cplx> c_;
    std::vector<char> mask_;
};

// Grid utilities on G^{d+1} with theta fastest.
std::vector<cplx> grid_fft(int d, int G, const std::vector<double>& v);        // coefficients, /G^{d+1}
std::vector<double> grid_ifft(int d, int G, const std::vector<cplx>& c);       // real part of the synthesis
std::vector<double> grid_d_theta(int d, int G, const std::vector<double>& v);
std::vector<double> grid_omega_d_phi(int d, int G, const std::vector<double>& v, const std::vector<double>& omega);
// h(phi_p, theta_m + shift(phi_p, theta_m)) for grid values h (band-limited to |j| <= band in theta)
std::vector<double> grid_shift_eval(int d, int G, const std::vector<double>& h, const std::vector<double>& shift,
                                    int band);

// ---------------------------------------------------------------- transport reduction

struct HomologicalResult {
    TorusFunction g;
    std::vector<std::pair<std::vector<int>, int>> clipped;  // modes with chi < 1 and f != 0
};

// g_{l,j} = i chi((omega.l + j V) <l>^tau1 / (gamma^upsilon <j>)) f_{l,j} / (omega.l + j V), 0 < <l,j> <= N
HomologicalResult solve_transport_homological(double V, const TorusFunction& f, const std::vector<double>& omega,
                                              int N, const DiophantineParams& dio);
// Residual omega.d_phi g + V d_theta g + Pi_N f - <f> per mode, restricted to modes with chi = 1.
double transport_homological_residual(double V, const TorusFunction& f, const TorusFunction& g,
                                      const std::vector<double>& omega, int N, const DiophantineParams& dio);

struct TransportOptions {
    int G = 0;          // grid size; 0 picks the default for d
    int Ncap = 0;       // 0 picks the default for d
    double s0 = 0.0;    // 0 picks ceil((d+1)/2 + 2)
    double s_high = 0.0;
    static TransportOptions defaults(int d);
    void fill(int d);
};

struct StepRecord {
    int m = 0;
    int N = 0;
    double delta_s0 = 0.0, delta_shigh = 0.0;
    int clipped = 0;
    double mean_f = 0.0;
    double straightening_residual = 0.0;
    double wallclock = 0.0;
};

struct TransportIterate {
    double V = 0.0;
    TorusFunction f;
    int m = 0;
    std::vector<StepRecord> history;
};

struct TransportStep {
    TransportIterate next;
    TorusFunction g;
    int clipped = 0;
    double max_dtheta_g = 0.0;
    double tail_fraction = 0.0;
};

TransportStep transport_kam_step(const TransportIterate& it, const std::vector<double>& omega, int N,
                                 const DiophantineParams& dio, const TransportOptions& opt);

// Conjugation check of one step: || T_{V,f}(G rho) - G(T_{V+,f+} rho) || / ||rho|| on the grid, with
// T_{V,f} = omega.d_phi + d_theta((V + f) .) and G rho = (1 + d_theta g) rho(theta + g).
double transport_conjugation_residual(double V, const TorusFunction& f, const TorusFunction& g, double Vp,
                                      const TorusFunction& fp, const std::vector<double>& omega,
                                      const TorusFunction& rho, int G);

// || T_{V0,f0}(B rho) - B(omega.d_phi rho + c d_theta rho) || / ||rho||, B rho = (1 + d_theta beta) rho(theta + beta)
double straightening_residual(double V0, const TorusFunction& f0, const TorusFunction& beta, double c,
                              const std::vector<double>& omega, const TorusFunction& rho, int G);

struct TransportRun {
    double c = 0.0;
    TorusFunction beta;
    std::vector<StepRecord> history;  // entry m describes f_m before step m, plus the final state
    double sum_means = 0.0;
};

// N_m = floor(N0^{(3/2)^m}), capped at Ncap.
int schedule_N(int N0, int m, int Ncap);

TransportRun transport_kam_run(const TorusFunction& f0, double V0, const std::vector<double>& omega,
                               const DiophantineParams& dio, int n_steps, const TransportOptions& opt,
                               std::uint64_t seed = 0);

// Real, even, exponentially decaying perturbation scaled so that ||f||_{s0} = delta0 * gamma.
TorusFunction manufactured_perturbation(int d, int Ncap, double delta0, double gamma, double s0, double sigma,
                                        std::uint64_t seed);
// Random real trigonometric polynomial with modes <l,j> <= K (test functions for the operator oracles).
TorusFunction random_test_function(int d, int Ncap, int K, std::uint64_t seed);

// ---------------------------------------------------------------- remainder reduction

using DiagonalSpectrum = std::map<int, double>;

// Toeplitz-in-time operator on normal modes: entries R^j_{j0}(p), p = l - l0 in Z^d with |p|_1 <= Ncap.
class ToeplitzOperator {
public:
    ToeplitzOperator() = default;
    ToeplitzOperator(int d, int Ncap, std::vector<int> modes);

    int d() const { return d_; }
    int Ncap() const { return N_; }
    const std::vector<int>& modes() const { return modes_; }
    int n() const { return int(modes_.size()); }
    int mode_index(int j) const;  // -1 if absent

    size_t n_blocks() const { return blocks_.size(); }
    std::vector<int> p_of(size_t b) const;
    long block_index(const std::vector<int>& p) const;  // -1 outside range
    Eigen::MatrixXcd& block(size_t b) { return blocks_[b]; }
    const Eigen::MatrixXcd& block(size_t b) const { return blocks_[b]; }

    cplx get(const std::vector<int>& p, int j, int j0) const;
    void set(const std::vector<int>& p, int j, int j0, cplx v);

    ToeplitzOperator project(int N) const;       // |p|_1 <= N
    ToeplitzOperator project_perp(int N) const;
    ToeplitzOperator diagonal_part() const;      // p = 0, j = j0
    double max_abs() const;
    // max over entries of |R^{-j}_{-j0}(-p) - conj R^j_{j0}(p)| and |Re R^j_{j0}(p)|
    double reality_defect() const;
    double imaginary_defect() const;
    void symmetrize();

    friend ToeplitzOperator operator*(const ToeplitzOperator& a, const ToeplitzOperator& b);
    ToeplitzOperator& operator+=(const ToeplitzOperator& o);
    ToeplitzOperator& operator-=(const ToeplitzOperator& o);
    ToeplitzOperator& operator*=(cplx a);
    friend ToeplitzOperator operator+(ToeplitzOperator a, const ToeplitzOperator& b) { return a += b; }
    friend ToeplitzOperator operator-(ToeplitzOperator a, const ToeplitzOperator& b) { return a -= b; }

private:
    int d_ = 0, N_ = 0, W_ = 0;
    std::vector<int> modes_;
    std::vector<Eigen::MatrixXcd> blocks_;
    std::vector<char> pmask_;
};

// sum_{(p, m)} <p, m>^{2s} sup_{j - j0 = m} |R^j_{j0}(p)|^2, square-rooted
double offdiag_norm(const ToeplitzOperator& R, double s);

struct RemainderHomological {
    ToeplitzOperator Psi;
    int clipped = 0;
};

// Psi^j_{j0}(p) = i chi(div <p>^tau2 / (gamma <j - j0>)) R^j_{j0}(p) / div, div = omega.p + mu_j - mu_j0,
// zero on (0, j, j); Psi supported on |p| <= N.
RemainderHomological solve_remainder_homological(const DiagonalSpectrum& mu, const ToeplitzOperator& R,
                                                 const std::vector<double>& omega, int N,
                                                 const DiophantineParams& dio);
// max entry of [omega.d_phi + D, Psi] + P_N R - floor(P_N R) over unclipped entries
double commutator_residual(const DiagonalSpectrum& mu, const ToeplitzOperator& R, const ToeplitzOperator& Psi,
                           const std::vector<double>& omega, int N, const DiophantineParams& dio);

struct RemainderStep {
    DiagonalSpectrum mu;
    ToeplitzOperator R;
    ToeplitzOperator Psi;
    int clipped = 0;
    double psi_norm = 0.0;
    int neumann_terms = 0;
};

RemainderStep remainder_kam_step(const DiagonalSpectrum& mu, const ToeplitzOperator& R,
                                 const std::vector<double>& omega, int N, const DiophantineParams& dio, double s0);

struct RemainderRecord {
    int m = 0, N = 0;
    double offdiag_s0 = 0.0;
    double psi_norm = 0.0;
    int clipped = 0;
    double symmetry_defect = 0.0;
    double wallclock = 0.0;
};

struct RemainderRun {
    DiagonalSpectrum mu0, mu_inf;
    ToeplitzOperator R_final;
    std::vector<RemainderRecord> history;
};

RemainderRun remainder_kam_run(const DiagonalSpectrum& mu0, const ToeplitzOperator& R0,
                               const std::vector<double>& omega, const DiophantineParams& dio, int n_steps,
                               double s0);

// Modewise inverse of omega.d_phi + D on normal modes with the first-Melnikov cut-off:
// u_{l,j} = chi(div <l>^tau1 / (gamma <j>)) rhs_{l,j} / (i div), div = omega.l + mu_j, for <l,j> <= N.
struct DiagonalInverse {
    TorusFunction u;
    std::vector<std::pair<std::vector<int>, int>> clipped;
};
DiagonalInverse invert_diagonal(const DiagonalSpectrum& mu, const std::vector<double>& omega,
                                const TorusFunction& rhs, int N, const DiophantineParams& dio);

// Zero-order remainder -Pi d_theta (L_r - L_0) Pi of the contour linearization at the travelling torus
// r = eps cos(j1 theta - phi), on normal modes 1 <= |j| <= Jmax (j != +-j1), d = 1, omega = Omega_{j1}.
struct ContourRemainder {
    DiagonalSpectrum mu0;
    ToeplitzOperator R0;
    std::vector<double> omega;
};
ContourRemainder remainder_from_contour(double lambda, double Omega, int j1, double eps, int Jmax, int Ncap,
                                        int M = 64, int P = 32);

}  // namespace qgvp::kam
