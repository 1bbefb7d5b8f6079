#include "qgvp/contour.hpp"

#include "qgvp/bessel.hpp"

#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace qgvp::contour {

namespace {

constexpr double pi = std::numbers::pi;

// -(I0(x_a) - I0(x_b)) / s^2 given a = x_a^2/4, b = x_b^2/4 and (a - b)/s^2.
double neg_I0_diff_over_s2(double a, double b, double amb_over_s2) {
    // I0 = sum q^k/(k!)^2; a^k - b^k = (a - b) h_k, h_1 = 1, h_{k+1} = a h_k + b^k
    double h = 1.0, bk = b, f = 1.0, s = 0.0;
    for (int k = 1; k < 200; ++k) {
        f /= double(k) * k;
        double t = h * f;
        s += t;
        if (t < 1e-18 * s) break;
        h = a * h + bk;
        bk *= b;
    }
    return -amb_over_s2 * s;
}

}  // namespace

void check_curve(const FourierCurve& r) {
    if (r.grid_size() < 8) throw std::invalid_argument("curve grid must have at least 8 nodes");
    double m = r.max_abs();
    if (!std::isfinite(m)) throw std::domain_error("curve has non-finite values");
    if (!(m < 0.5)) throw std::domain_error("curve violates the smallness guard max|r| < 1/2");
    // roundoff-level content (e.g. the disc after a few steps) is not under-resolution
    double top = 0.0;
    for (int j = r.grid_size() / 4; j <= r.max_mode(); ++j) top += std::norm(r.coeff(j));
    if (r.top_octave_fraction() > 1e-8 && std::sqrt(top) > 1e-14)
        throw std::domain_error("curve under-resolved: top-octave energy fraction above 1e-8");
}

std::vector<double> radius_from_r(const FourierCurve& r) {
    auto g = r.grid();
    for (auto& v : g) {
        if (!(std::abs(v) < 0.5)) throw std::domain_error("radius_from_r: smallness guard violated");
        v = std::sqrt(1.0 + 2.0 * v);
    }
    return g;
}

double chord(const FourierCurve& r, double theta, double eta) {
    double Rt = std::sqrt(1.0 + 2.0 * r.eval(theta));
    double Re = std::sqrt(1.0 + 2.0 * r.eval(eta));
    double s = std::sin(0.5 * (eta - theta));
    double d = Rt - Re;
    return std::sqrt(d * d + 4.0 * Rt * Re * s * s);
}

const std::vector<double>& log_weights(int M) {
    static std::map<int, std::vector<double>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(M);
    if (it != cache.end()) return it->second;
    std::vector<double> w(M);
    double h = 2.0 * pi / M;
    for (int q = 0; q < M; ++q) {
        double s = -std::log(2.0);
        for (int k = 1; k < M / 2; ++k) s -= std::cos(k * q * h) / k;
        s -= ((q % 2) ? -1.0 : 1.0) / M;
        w[q] = s / M;
    }
    return cache[M] = std::move(w);
}

const std::vector<double>& log_part_circulant(int M, double lambda) {
    static std::map<std::pair<int, double>, std::vector<double>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(M, lambda);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<double> ck(M / 2 + 1);
    for (int k = 0; k <= M / 2; ++k) ck[k] = bessel::product_IK(k, lambda);
    std::vector<double> c(M);
    double h = 2.0 * pi / M;
    for (int q = 0; q < M; ++q) {
        double s = ck[0] + ((q % 2) ? -ck[M / 2] : ck[M / 2]);
        for (int k = 1; k < M / 2; ++k) s += 2.0 * ck[k] * std::cos(k * q * h);
        c[q] = s / M;
    }
    if (cache.size() > 64) cache.clear();
    return cache[key] = std::move(c);
}

Geometry geometry(const FourierCurve& r) {
    Geometry g;
    int M = r.grid_size();
    g.R = radius_from_r(r);
    auto dr = r.derivative().grid();
    g.dR.resize(M);
    g.theta.resize(M);
    for (int m = 0; m < M; ++m) {
        g.dR[m] = dr[m] / g.R[m];
        g.theta[m] = 2.0 * pi * m / M;
    }
    return g;
}

KernelSplit kernel_split(const FourierCurve& r, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    const int M = r.grid_size();
    Geometry g = geometry(r);
    KernelSplit ks;
    ks.M = M;
    ks.lambda = lambda;
    ks.log_part = Eigen::MatrixXd::Zero(M, M);
    ks.script_K = Eigen::MatrixXd::Zero(M, M);
    ks.smooth1 = Eigen::MatrixXd::Zero(M, M);
    ks.smooth2 = Eigen::MatrixXd::Zero(M, M);
    ks.chord = Eigen::MatrixXd::Zero(M, M);

    const double h = 2.0 * pi / M, l2 = lambda * lambda;
    std::vector<double> sq(M), K0s(M), sK(M);
    for (int q = 1; q < M; ++q) {
        sq[q] = std::sin(0.5 * q * h);
        double as = std::abs(sq[q]);
        K0s[q] = gsl_sf_bessel_K0(2.0 * lambda * as);
        sK[q] = sq[q] * sq[q] * std::log(as);
    }
    for (int m = 0; m < M; ++m) {
        double Rm = g.R[m], dRm = g.dR[m];
        ks.smooth1(m, m) = -l2 * (dRm * dRm + Rm * Rm - 1.0);
        ks.smooth2(m, m) = -0.5 * std::log(Rm * Rm + dRm * dRm);
        for (int n = m + 1; n < M; ++n) {
            int q = n - m;
            double s = sq[q], Rn = g.R[n];
            double d = Rm - Rn;
            double A = std::sqrt(d * d + 4.0 * Rm * Rn * s * s);
            double a = 0.25 * l2 * A * A, b = l2 * s * s;
            double ds = d / s;
            double amb = 0.25 * l2 * (ds * ds + 4.0 * (Rm * Rn - 1.0));
            double S1 = neg_I0_diff_over_s2(a, b, amb);
            double S2 = gsl_sf_bessel_K0(lambda * A) - K0s[q] - sK[q] * S1;
            ks.log_part(m, n) = ks.log_part(n, m) = K0s[q];
            ks.script_K(m, n) = ks.script_K(n, m) = sK[q];
            ks.smooth1(m, n) = ks.smooth1(n, m) = S1;
            ks.smooth2(m, n) = ks.smooth2(n, m) = S2;
            ks.chord(m, n) = ks.chord(n, m) = A;
        }
    }
    return ks;
}

double reconstruction_residual(const KernelSplit& ks) {
    double worst = 0.0;
    for (int m = 0; m < ks.M; ++m)
        for (int n = 0; n < ks.M; ++n) {
            if (m == n) continue;
            double direct = bessel::K(0, ks.lambda * ks.chord(m, n));
            double rec = ks.log_part(m, n) + ks.script_K(m, n) * ks.smooth1(m, n) + ks.smooth2(m, n);
            worst = std::max(worst, std::abs(direct - rec));
        }
    return worst;
}

Eigen::MatrixXd kernel_matrix(const KernelSplit& ks) {
    const int M = ks.M;
    const auto& w = log_weights(M);
    const auto& C = log_part_circulant(M, ks.lambda);
    const double h = 2.0 * pi / M;
    Eigen::MatrixXd Q(M, M);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < M; ++n) {
            int q = ((n - m) % M + M) % M;
            double s = std::sin(0.5 * q * h);
            Q(m, n) = C[q] + w[q] * s * s * ks.smooth1(m, n) + ks.smooth2(m, n) / M;
        }
    return Q;
}

Linearization::Linearization(const FourierCurve& r, double lambda) : M_(r.grid_size()), lambda_(lambda) {
    check_curve(r);
    g_ = geometry(r);
    Q_ = kernel_matrix(kernel_split(r, lambda));
}

std::vector<double> Linearization::F_grid() const {
    std::vector<double> F(M_, 0.0);
    for (int m = 0; m < M_; ++m) {
        double s = 0.0;
        for (int n = 0; n < M_; ++n) {
            double x = g_.theta[n] - g_.theta[m];
            double W = (g_.dR[n] * g_.dR[m] + g_.R[n] * g_.R[m]) * std::sin(x) +
                       (g_.R[n] * g_.dR[m] - g_.dR[n] * g_.R[m]) * std::cos(x);
            s += Q_(m, n) * W;
        }
        F[m] = s;
    }
    return F;
}

std::vector<double> Linearization::V(double Omega) const {
    std::vector<double> V(M_);
    for (int m = 0; m < M_; ++m) {
        double s = 0.0;
        for (int n = 0; n < M_; ++n) {
            double x = g_.theta[n] - g_.theta[m];
            s += Q_(m, n) * (g_.dR[n] * std::sin(x) + g_.R[n] * std::cos(x));
        }
        V[m] = Omega + s / g_.R[m];
    }
    return V;
}

FourierCurve F_lambda(const FourierCurve& r, double lambda) {
    // the projection drops the O(quadrature error) mean
    return FourierCurve::from_grid(Linearization(r, lambda).F_grid());
}

std::vector<double> V_r(const FourierCurve& r, double lambda, double Omega) {
    return Linearization(r, lambda).V(Omega);
}

std::vector<double> L_r_apply(const FourierCurve& r, double lambda, const std::vector<double>& rho) {
    Linearization lin(r, lambda);
    if (int(rho.size()) != r.grid_size()) throw std::invalid_argument("L_r_apply: size mismatch");
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(rho.data(), rho.size());
    Eigen::VectorXd y = lin.L() * x;
    return std::vector<double>(y.data(), y.data() + y.size());
}

namespace {

FourierCurve lin_apply(const Linearization& lin, double Omega, const FourierCurve& rho) {
    auto p = rho.grid();
    auto V = lin.V(Omega);
    int M = int(p.size());
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(p.data(), M);
    Eigen::VectorXd Lp = lin.L() * x;
    std::vector<double> u(M);
    for (int m = 0; m < M; ++m) u[m] = -V[m] * p[m] + Lp[m];
    return FourierCurve::from_grid(u).derivative();
}

}  // namespace

FourierCurve linearized_apply(const FourierCurve& r, double lambda, double Omega, const FourierCurve& rho) {
    if (rho.grid_size() != r.grid_size()) throw std::invalid_argument("linearized_apply: size mismatch");
    return lin_apply(Linearization(r, lambda), Omega, rho);
}

FourierCurve dF_apply(const FourierCurve& r, double lambda, const FourierCurve& rho) {
    if (rho.grid_size() != r.grid_size()) throw std::invalid_argument("dF_apply: size mismatch");
    FourierCurve out = lin_apply(Linearization(r, lambda), 0.0, rho);
    return -1.0 * out;
}

double angular_impulse(const FourierCurve& r) {
    auto g = r.grid();
    double s = 0.0;
    for (double v : g) s += (1.0 + 2.0 * v) * (1.0 + 2.0 * v);
    return 0.25 * s / double(g.size());
}

double energy(const FourierCurve& r, double lambda) {
    check_curve(r);
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    const int M = r.grid_size();
    Geometry g = geometry(r);
    const auto& w = log_weights(M);
    std::vector<cplx> z(M), dz(M);
    for (int m = 0; m < M; ++m) {
        cplx e = std::polar(1.0, g.theta[m]);
        z[m] = g.R[m] * e;
        dz[m] = cplx(g.dR[m], g.R[m]) * e;
    }
    const double h = 2.0 * pi / M;
    cplx total = 0.0;
    for (int m = 0; m < M; ++m) {
        cplx row = 0.0;
        for (int n = 0; n < M; ++n) {
            if (n == m) continue;  // both parts vanish on the diagonal
            int q = ((n - m) % M + M) % M;
            cplx dzbar = std::conj(z[m] - z[n]);
            double x = lambda * std::abs(z[m] - z[n]);
            cplx base = dzbar * dzbar * dz[m] * dz[n];
            cplx G = -0.5 * base * bessel::kernel_g(x);
            // g(x) = -2 log(x) I2(x)/x^2 + smooth, so the log|s| coefficient of G is:
            cplx P = base * (gsl_sf_bessel_In(2, x) / (x * x));
            double ls = std::log(std::abs(std::sin(0.5 * q * h)));
            row += w[q] * P + (G - ls * P) / double(M);
        }
        total += row;
    }
    total /= double(M);
    if (std::abs(total.imag()) > 1e-10 * std::max(1.0, std::abs(total.real())))
        throw std::runtime_error("energy: imaginary residue above tolerance");
    return total.real();
}

double hamiltonian(const FourierCurve& r, double lambda, double Omega) {
    return 0.5 * (energy(r, lambda) - Omega * angular_impulse(r));
}

}  // namespace qgvp::contour
