#include "qgvp/bessel.hpp"

#include "qgvp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qgvp::bessel {

namespace {

constexpr double pi = std::numbers::pi;
constexpr long double gamma_l = 0.577215664901532860606512090082402431L;

double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

void require_positive(double z, const char* what) {
    if (!(z > 0.0) || !std::isfinite(z))
        throw std::domain_error(std::string(what) + ": argument must be positive and finite");
}

// J_n by power series; fine for |x| <= 8.
double J_series(int n, double x) {
    double h = 0.5 * x, h2 = h * h;
    double t = std::pow(h, n) / std::tgamma(n + 1.0);
    double s = t;
    for (int m = 1; m < 200; ++m) {
        t *= -h2 / (m * double(m + n));
        s += t;
        if (std::abs(t) < 1e-18 * std::abs(s) && m > h) break;
    }
    return s;
}

double J_trapezoid(int n, double x, int nodes) {
    double s = 0.0;
    for (int k = 0; k < nodes; ++k) {
        double th = 2.0 * pi * k / nodes;
        s += std::cos(n * th - x * std::sin(th));
    }
    return s / nodes;
}

double J_hankel(int n, double x) {
    double mu = 4.0 * n * n;
    double P = 1.0, Q = 0.0, t = 1.0, prev = 1.0;
    for (int k = 1; k < 60; ++k) {
        double nt = t * (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * x);
        if (std::abs(nt) > std::abs(prev) && k > 2) break;
        t = nt;
        prev = std::abs(t);
        // sign pattern: P = a0 - a2 + a4 ..., Q = a1 - a3 + ...
        int r = k % 4;
        if (r == 1) Q += t;
        else if (r == 2) P -= t;
        else if (r == 3) Q -= t;
        else P += t;
        if (std::abs(t) < 1e-17) break;
    }
    double chi = x - (0.5 * n + 0.25) * pi;
    return std::sqrt(2.0 / (pi * x)) * (P * std::cos(chi) - Q * std::sin(chi));
}

// log of sum_k (z^2/4)^k / (k! (j+1)...(j+k)), with rescaling against overflow.
double log_I_scaled_sum(int j, double z, int min_terms) {
    double q = 0.25 * z * z;
    double t = 1.0, s = 1.0, logscale = 0.0;
    int kmax = std::max(min_terms, int(z) + 200);
    for (int k = 0; k < kmax; ++k) {
        t *= q / ((k + 1.0) * (j + k + 1.0));
        s += t;
        if (s > 1e250) {
            s *= 1e-250;
            t *= 1e-250;
            logscale += 250.0 * std::log(10.0);
        }
        if (t < 1e-18 * s && k + 1 > 0.5 * z) break;
    }
    return std::log(s) + logscale;
}

}  // namespace

void Policy::validate() const {
    if (series_terms < 30) throw std::invalid_argument("BesselPolicy: series_terms must be >= 30");
    if (quad_nodes < 64) throw std::invalid_argument("BesselPolicy: quad_nodes must be >= 64");
    if (!(crossover_large_lambda > 0.0))
        throw std::invalid_argument("BesselPolicy: crossover_large_lambda must be positive");
    if (!(small_x_cutoff > 0.0 && small_x_cutoff < 1.0))
        throw std::invalid_argument("BesselPolicy: small_x_cutoff must lie in (0,1)");
}

const Policy& default_policy() {
    static const Policy p{};
    return p;
}

double digamma_int(int n) {
    if (n < 1) throw std::domain_error("digamma_int: n must be >= 1");
    long double h = 0.0L;
    for (int k = 1; k < n; ++k) h += 1.0L / k;
    return double(h - gamma_l);
}

double J(int n, double x) {
    if (n < 0 || n > 8) throw std::invalid_argument("J: order must be in [0, 8]");
    double sgn = (x < 0.0 && (n % 2)) ? -1.0 : 1.0;
    double ax = std::abs(x);
    double v;
    if (ax <= 8.0) v = J_series(n, ax);
    else if (ax < 60.0) v = J_trapezoid(n, ax, int(std::ceil(ax)) + 48);
    else v = J_hankel(n, ax);
    return sgn * v;
}

double J0(double x) { return J(0, x); }

double J0_quadrature(double x, int nodes) {
    // (1/pi) int_0^pi cos(x sin t) dt equals the periodic mean over [0, 2pi).
    return J_trapezoid(0, x, nodes);
}

double J0_deriv(int q, double x) {
    if (q < 0 || q > 8) throw std::invalid_argument("J0_deriv: q must be in [0, 8]");
    double s = 0.0;
    for (int k = 0; k <= q; ++k) {
        int nu = 2 * k - q;
        double jn = J(std::abs(nu), x);
        if (nu < 0 && (nu % 2)) jn = -jn;
        s += ((k % 2) ? -1.0 : 1.0) * binom(q, k) * jn;
    }
    return std::ldexp(s, -q);
}

double log_I(int j, double z, const Policy& p) {
    j = std::abs(j);
    if (z < 0.0 || !std::isfinite(z)) throw std::domain_error("I: argument must be >= 0");
    if (z == 0.0) return j == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return j * std::log(0.5 * z) - std::lgamma(j + 1.0) + log_I_scaled_sum(j, z, p.series_terms);
}

double I(int j, double z, const Policy& p) {
    double l = log_I(j, z, p);
    if (l > 709.0) throw std::overflow_error("I: result exceeds double range");
    return std::exp(l);
}

// Power series; returns log K_n(z). Accurate for z <= 2.
static double log_K_series(int n, double z) {
    n = std::abs(n);
    long double zz = z;
    long double h = zz / 2, q = h * h, lh = std::log(h);
    if (n == 0) {
        // K0 = sum_m q^m/(m!)^2 (psi(m+1) - log(z/2))
        long double c = 1.0L, psi = -gamma_l, s = 0.0L;
        for (int m = 0; m < 400; ++m) {
            if (m > 0) {
                c *= q / ((long double)m * m);
                psi += 1.0L / m;
            }
            long double t = c * (psi - lh);
            s += t;
            if (m > 2 && std::abs(t) < 1e-21L * std::abs(s)) break;
        }
        return double(std::log(s));
    }
    // K_n = P * [A + (-1)^n v B], P = (1/2) (z/2)^-n (n-1)!
    long double A = 0.0L, u = 1.0L;
    for (int k = 0; k < n; ++k) {
        if (k > 0) u *= -q / ((long double)k * (n - k));
        A += u;
    }
    long double logv = 2.0L * n * lh - std::lgamma((long double)n) - std::lgamma((long double)n + 1);
    long double B = 0.0L;
    if (logv > -200.0L) {
        long double w = 1.0L, psi1 = -gamma_l, psi2 = -gamma_l;
        for (int i = 1; i <= n; ++i) psi2 += 1.0L / i;
        for (int k = 0; k < 400; ++k) {
            if (k > 0) {
                w *= q / ((long double)k * (n + k));
                psi1 += 1.0L / k;
                psi2 += 1.0L / (n + k);
            }
            long double t = w * (psi1 + psi2 - 2.0L * lh);
            B += t;
            if (k > 2 && std::abs(t) < 1e-21L * std::abs(B)) break;
        }
        B *= std::exp(logv);
        if (n % 2) B = -B;
    }
    long double logP = -n * lh + std::lgamma((long double)n) - std::log(2.0L);
    return double(logP + std::log(A + B));
}

// Integral representation K_n(z) = 1/2 int_R exp(-z cosh t + n t) dt; returns log.
static double log_K_integral(int n, double z) {
    n = std::abs(n);
    double ts = std::asinh(n / z);
    auto phi = [&](double t) { return -z * std::cosh(t) + n * t; };
    double ps = phi(ts);
    double sigma = 1.0 / std::sqrt(z * std::cosh(ts));
    double h = std::min(0.1, sigma / 2.5);
    double s = 1.0;
    for (int dir = -1; dir <= 1; dir += 2) {
        for (int k = 1; k < 100000; ++k) {
            double e = phi(ts + dir * k * h) - ps;
            if (e < -48.0) break;
            s += std::exp(e);
        }
    }
    return ps + std::log(0.5 * h * s);
}

double log_K(int j, double z, const Policy&) {
    require_positive(z, "K");
    return z <= 2.0 ? log_K_series(j, z) : log_K_integral(j, z);
}

double K(int j, double z, const Policy& p) {
    double l = log_K(j, z, p);
    if (l > 709.0) throw std::overflow_error("K: result exceeds double range");
    return std::exp(l);
}

double K_series(int j, double z) {
    require_positive(z, "K_series");
    return std::exp(log_K_series(j, z));
}

double K_integral(int j, double z) {
    require_positive(z, "K_integral");
    return std::exp(log_K_integral(j, z));
}

double product_IK_direct(int j, double lambda, const Policy& p) {
    require_positive(lambda, "product_IK");
    return std::exp(log_I(j, lambda, p) + log_K(j, lambda, p));
}

double product_IK_asym_lambda(int j, double lambda, int N) {
    require_positive(lambda, "product_IK_asym_lambda");
    double mu = 4.0 * j * j, x = 1.0 / (4.0 * lambda * lambda);
    double t = 1.0, s = 1.0;
    for (int m = 1; m <= N; ++m) {
        t *= -(2.0 * m - 1) / (2.0 * m) * (mu - (2.0 * m - 1) * (2.0 * m - 1)) * x;
        s += t;
    }
    return s / (2.0 * lambda);
}

// Adaptive large-lambda expansion; returns false if optimal truncation is not accurate enough.
static bool asym_lambda_adaptive(int j, double lambda, double& out) {
    double mu = 4.0 * j * j, x = 1.0 / (4.0 * lambda * lambda);
    double t = 1.0, s = 1.0, prev = 1.0;
    for (int m = 1; m < 200; ++m) {
        double nt = t * (-(2.0 * m - 1) / (2.0 * m)) * (mu - (2.0 * m - 1) * (2.0 * m - 1)) * x;
        if (std::abs(nt) > prev) break;
        t = nt;
        prev = std::abs(t);
        s += t;
        if (std::abs(t) < 1e-17 * std::abs(s)) {
            out = s / (2.0 * lambda);
            return true;
        }
    }
    out = s / (2.0 * lambda);
    return false;
}

double product_IK(int j, double lambda, const Policy& p) {
    require_positive(lambda, "product_IK");
    j = std::abs(j);
    if (lambda >= p.crossover_large_lambda) {
        double v;
        bool ok = asym_lambda_adaptive(j, lambda, v);
        if (ok || lambda > 650.0) return v;
    }
    // high order: the log-space product loses ~1e-13 relative here, the j-expansion does not
    if (j >= 20 && lambda <= 0.25 * j) {
        double a = product_IK_asym_j(j, lambda, 16), b = product_IK_asym_j(j, lambda, 14);
        if (std::abs(a - b) <= 1e-16 * a) return a;
    }
    return product_IK_direct(j, lambda, p);
}

double product_IK_nicholson(int j, double lambda, const Policy& p) {
    require_positive(lambda, "product_IK_nicholson");
    j = std::abs(j);
    int n = std::max(16, p.quad_nodes / 4);
    // Substituting u = pi/2 - tau moves the log singularity of K0 to u = 0;
    // dyadic panels toward 0 resolve it.
    auto f = [&](double u) { return K(0, 2.0 * lambda * std::sin(u), p) * std::cos(2.0 * j * u); };
    double s = 0.0, b = 0.5 * pi;
    for (int k = 0; k < 56; ++k) {
        double a = 0.5 * b;
        s += quad::integrate(f, a, b, n);
        b = a;
    }
    return 2.0 / pi * s;
}

namespace {

// 2^{q-1} int_0^inf J0^(q)(2 lambda sinh(t/2)) sinh^q(t/2) e^{-jt} dt
double laplace_integral(int j, double lambda, int q) {
    const int n = 24;
    const double U1 = 40.0;
    const double T1 = 2.0 * std::asinh(U1 / (2.0 * lambda));
    auto ft = [&](double t) {
        double sh = std::sinh(0.5 * t);
        return J0_deriv(q, 2.0 * lambda * sh) * std::pow(sh, q) * std::exp(-j * t);
    };
    double s1 = 0.0, t = 0.0;
    bool reached = false;
    while (true) {
        double w = lambda * std::cosh(0.5 * t);
        double dt = std::min({0.25, 2.0 / (1.0 + w), 1.5 / std::max(1, j)});
        double tb = t + dt;
        if (tb >= T1) {
            tb = T1;
            reached = true;
        }
        s1 += quad::integrate(ft, t, tb, n);
        t = tb;
        if (reached) break;
        if (2 * j > q) {
            double env = std::pow(std::sinh(0.5 * t), q) * std::exp(-j * t);
            if (env < 1e-19 * (2 * j - q) && t > 1.0) return std::ldexp(s1, q - 1);
        }
    }
    // Tail in u = 2 lambda sinh(t/2): dt = du / sqrt(lambda^2 + u^2/4).
    auto fu = [&](double u) {
        double r = std::sqrt(4.0 * lambda * lambda + u * u);
        double e = std::pow(2.0 * lambda / (u + r), 2 * j);
        return J0_deriv(q, u) * std::pow(u / (2.0 * lambda), q) * e / (0.5 * r);
    };
    std::vector<double> terms;
    double a = U1;
    for (int k = 0; k < 80; ++k) {
        double b = a + pi;
        terms.push_back(quad::integrate(fu, a, b, n));
        a = b;
    }
    return std::ldexp(s1 + quad::accelerate(terms), q - 1);
}

}  // namespace

double product_IK_laplace(int j, double lambda, const Policy&) {
    require_positive(lambda, "product_IK_laplace");
    return laplace_integral(std::abs(j), lambda, 0);
}

double product_IK_deriv(int j, double lambda, int q, const Policy& p) {
    require_positive(lambda, "product_IK_deriv");
    j = std::abs(j);
    if (q < 0 || q > 6) throw std::invalid_argument("product_IK_deriv: q must be in [0, 6]");
    if (q == 0) return product_IK(j, lambda, p);
    if (2 * j <= q)
        throw std::invalid_argument("product_IK_deriv: requires 2j > q (use the Leibniz form)");
    return laplace_integral(j, lambda, q);
}

double product_IK_deriv_leibniz(int j, double lambda, int q, const Policy& p) {
    require_positive(lambda, "product_IK_deriv_leibniz");
    j = std::abs(j);
    if (q < 0 || q > 8) throw std::invalid_argument("product_IK_deriv_leibniz: q must be in [0, 8]");
    if (q == 0) return product_IK(j, lambda, p);
    // I_j^(a) = 2^-a sum_i C(a,i) I_{|j-a+2i|},  K_j^(b) = (-1/2)^b sum_i C(b,i) K_{|j-b+2i|}
    long double s = 0.0L;
    for (int a = 0; a <= q; ++a) {
        int b = q - a;
        for (int i = 0; i <= a; ++i) {
            int mi = std::abs(j - a + 2 * i);
            double li = log_I(mi, lambda, p);
            for (int k = 0; k <= b; ++k) {
                int mk = std::abs(j - b + 2 * k);
                double c = binom(q, a) * binom(a, i) * binom(b, k) * ((b % 2) ? -1.0 : 1.0);
                s += (long double)c * std::exp((long double)(li + log_K(mk, lambda, p)));
            }
        }
    }
    return double(std::ldexp(s, -q));
}

double stirling2(int m, int k) {
    if (m < 0 || k < 0) return 0.0;
    if (m == 0) return k == 0 ? 1.0 : 0.0;
    if (k == 0 || k > m) return 0.0;
    static std::vector<std::vector<double>> tab;
    if (int(tab.size()) <= m) {
        int old = int(tab.size());
        tab.resize(m + 1);
        for (int mm = old; mm <= m; ++mm) {
            tab[mm].assign(mm + 1, 0.0);
            if (mm == 0) {
                tab[0][0] = 1.0;
                continue;
            }
            for (int kk = 1; kk <= mm; ++kk) {
                double a = (kk - 1 <= mm - 1) ? tab[mm - 1][kk - 1] : 0.0;
                double b = (kk <= mm - 1) ? tab[mm - 1][kk] : 0.0;
                tab[mm][kk] = a + kk * b;
            }
        }
    }
    return tab[m][k];
}

double alpha_coeff(int j, int m) {
    double mu = 4.0 * j * j, a = 1.0, P = 1.0;
    for (int i = 1; i <= m; ++i) {
        a *= -(2.0 * i - 1) / (2.0 * i);
        P *= mu - (2.0 * i - 1) * (2.0 * i - 1);
    }
    return a * P;
}

double b_coeff(int m, double lambda) {
    if (m == 0) return 1.0;
    double x = 0.25 * lambda * lambda, s = 0.0, xk = 1.0, fk = 1.0;
    for (int k = 1; k <= m; ++k) {
        xk *= x;
        fk *= k;
        s += (((m - k) % 2) ? -1.0 : 1.0) * stirling2(m, k) / fk * xk;
    }
    return s;
}

AsymptoticCoeffs asymptotic_coeffs(int jmax, int mmax) {
    AsymptoticCoeffs c;
    c.jmax = jmax;
    c.mmax = mmax;
    c.alpha.assign(jmax + 1, std::vector<double>(mmax + 1, 0.0));
    for (int j = 0; j <= jmax; ++j)
        for (int m = 0; m <= mmax; ++m) c.alpha[j][m] = alpha_coeff(j, m);
    c.stirling.assign(mmax + 1, std::vector<double>(mmax + 1, 0.0));
    for (int m = 0; m <= mmax; ++m)
        for (int k = 0; k <= m; ++k) c.stirling[m][k] = stirling2(m, k);
    c.b_poly.assign(mmax + 1, std::vector<double>(mmax + 1, 0.0));
    c.b_poly[0][0] = 1.0;
    for (int m = 1; m <= mmax; ++m) {
        double fk = 1.0, pk = 1.0;
        for (int k = 1; k <= m; ++k) {
            fk *= k;
            pk *= 0.25;
            c.b_poly[m][k] = (((m - k) % 2) ? -1.0 : 1.0) * c.stirling[m][k] / fk * pk;
        }
    }
    return c;
}

double product_IK_asym_j(int j, double lambda, int M) {
    if (j < 1) throw std::invalid_argument("product_IK_asym_j: j must be positive");
    std::vector<double> b(M + 1);
    for (int m = 0; m <= M; ++m) b[m] = b_coeff(m, lambda);
    double s = 0.0, jp = 1.0;
    for (int n = 0; n <= M; ++n) {
        double c = 0.0;
        for (int m = 0; m <= n; ++m) c += (((n - m) % 2) ? -1.0 : 1.0) * b[m] * b[n - m];
        s += c / jp;
        jp *= j;
    }
    return s / (2.0 * j);
}

double kernel_f_series(double x) {
    require_positive(x, "kernel_f");
    long double q = 0.25L * x * x, lh = std::log(0.5L * x);
    long double c = 1.0L, p1 = -gamma_l, p2 = 1.0L - gamma_l, s = 0.0L;
    for (int k = 0; k < 400; ++k) {
        if (k > 0) {
            c *= q / ((long double)k * (k + 1));
            p1 += 1.0L / k;
            p2 += 1.0L / (k + 1);
        }
        long double t = c * (p1 + p2 - 2.0L * lh);
        s += t;
        if (k > 2 && std::abs(t) < 1e-21L * std::abs(s)) break;
    }
    return double(0.5L * s);
}

double kernel_f_direct(double x) {
    require_positive(x, "kernel_f");
    return -2.0 * (x * K(1, x) - 1.0) / (x * x);
}

double kernel_f(double x, const Policy& p) {
    require_positive(x, "kernel_f");
    return x < p.small_x_cutoff ? kernel_f_series(x) : kernel_f_direct(x);
}

double kernel_g_series(double x) {
    require_positive(x, "kernel_g");
    long double q = 0.25L * x * x, lh = std::log(0.5L * x);
    long double c = 0.5L, p1 = -gamma_l, p3 = 1.5L - gamma_l, s = 0.0L;
    for (int k = 0; k < 400; ++k) {
        if (k > 0) {
            c *= q / ((long double)k * (k + 2));
            p1 += 1.0L / k;
            p3 += 1.0L / (k + 2);
        }
        long double t = c * (p1 + p3 - 2.0L * lh);
        s += t;
        if (k > 2 && std::abs(t) < 1e-21L * std::abs(s)) break;
    }
    return double(0.25L * s);
}

double kernel_g_direct(double x) {
    require_positive(x, "kernel_g");
    double x2 = x * x;
    return (x2 + 2.0 * x2 * K(2, x) - 4.0) / (x2 * x2);
}

double kernel_g(double x, const Policy& p) {
    require_positive(x, "kernel_g");
    return x < p.small_x_cutoff ? kernel_g_series(x) : kernel_g_direct(x);
}

}  // namespace qgvp::bessel
