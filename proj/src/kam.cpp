#include "qgvp/kam.hpp"

#include "qgvp/contour.hpp"
#include "qgvp/spectrum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>

namespace qgvp::kam {

using cantor::bracket;
using cantor::bracket_j;
using cantor::chi;
using cantor::dot;
using std::numbers::pi;

int bracket_lj(const std::vector<int>& l, int j) {
    int s = 0;
    for (int v : l) s += std::abs(v);
    return std::max({1, s, std::abs(j)});
}

namespace {

size_t ipow(int b, int e) {
    size_t r = 1;
    for (int k = 0; k < e; ++k) r *= size_t(b);
    return r;
}

// Multi-dimensional complex FFT of G^{rank} with a cached plan.
struct Plan {
    int rank, G;
    size_t n;
    fftw_complex* buf;
    fftw_plan fwd, bwd;
    Plan(int r, int g) : rank(r), G(g), n(ipow(g, r)) {
        buf = fftw_alloc_complex(n);
        std::vector<int> dims(r, g);
        fwd = fftw_plan_dft(r, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft(r, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Plan() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(buf);
    }
};

std::mutex plan_mu;

Plan& get_plan(int rank, int G) {
    static std::vector<std::unique_ptr<Plan>> cache;
    std::lock_guard<std::mutex> lk(plan_mu);
    for (auto& p : cache)
        if (p->rank == rank && p->G == G) return *p;
    cache.push_back(std::make_unique<Plan>(rank, G));
    return *cache.back();
}

bool is_within(const std::vector<int>& p, int N) {
    int s = 0;
    for (int v : p) s += std::abs(v);
    return s <= N;
}

int wrap(int k, int G) { return k < G / 2 ? k : k - G; }

// frequency multi-index of grid-spectrum position k (theta last)
void grid_modes(size_t k, int d, int G, std::vector<int>& l, int& j) {
    l.assign(d, 0);
    j = wrap(int(k % G), G);
    k /= G;
    for (int a = d - 1; a >= 0; --a) {
        l[a] = wrap(int(k % G), G);
        k /= G;
    }
}

size_t grid_pos(const std::vector<int>& l, int j, int G) {
    size_t k = 0;
    for (int v : l) k = k * G + size_t((v % G + G) % G);
    return k * G + size_t((j % G + G) % G);
}

void check_grid(int d, int G, size_t n) {
    if (d < 1) throw std::invalid_argument("torus dimension d must be >= 1");
    if (G < 4 || G % 2) throw std::invalid_argument("grid size must be even and >= 4");
    if (n != ipow(G, d + 1)) throw std::invalid_argument("grid values have the wrong size");
}

double grid_l2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / double(v.size()));
}

}  // namespace

std::vector<cplx> grid_fft(int d, int G, const std::vector<double>& v) {
    check_grid(d, G, v.size());
    Plan& p = get_plan(d + 1, G);
    std::lock_guard<std::mutex> lk(plan_mu);
    for (size_t k = 0; k < p.n; ++k) {
        p.buf[k][0] = v[k];
        p.buf[k][1] = 0.0;
    }
    fftw_execute(p.fwd);
    std::vector<cplx> c(p.n);
    double s = 1.0 / double(p.n);
    for (size_t k = 0; k < p.n; ++k) c[k] = cplx(p.buf[k][0], p.buf[k][1]) * s;
    return c;
}

std::vector<double> grid_ifft(int d, int G, const std::vector<cplx>& c) {
    if (c.size() != ipow(G, d + 1)) throw std::invalid_argument("grid_ifft: wrong size");
    Plan& p = get_plan(d + 1, G);
    std::lock_guard<std::mutex> lk(plan_mu);
    for (size_t k = 0; k < p.n; ++k) {
        p.buf[k][0] = c[k].real();
        p.buf[k][1] = c[k].imag();
    }
    fftw_execute(p.bwd);
    std::vector<double> v(p.n);
    for (size_t k = 0; k < p.n; ++k) v[k] = p.buf[k][0];
    return v;
}

namespace {

template <class Mult>
std::vector<double> grid_multiplier(int d, int G, const std::vector<double>& v, Mult mult) {
    auto c = grid_fft(d, G, v);
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < c.size(); ++k) {
        grid_modes(k, d, G, l, j);
        bool nyq = (j == -G / 2);
        for (int x : l) nyq = nyq || x == -G / 2;
        c[k] = nyq ? cplx(0.0) : c[k] * mult(l, j);
    }
    return grid_ifft(d, G, c);
}

}  // namespace

std::vector<double> grid_d_theta(int d, int G, const std::vector<double>& v) {
    return grid_multiplier(d, G, v, [](const std::vector<int>&, int j) { return cplx(0.0, j); });
}

std::vector<double> grid_omega_d_phi(int d, int G, const std::vector<double>& v, const std::vector<double>& omega) {
    if (int(omega.size()) != d) throw std::invalid_argument("omega has the wrong dimension");
    return grid_multiplier(d, G, v, [&](const std::vector<int>& l, int) { return cplx(0.0, dot(omega, l)); });
}

namespace {

// theta-Fourier coefficients (j = 0..band) of every phi slice
std::vector<std::vector<cplx>> slice_coeffs(int d, int G, const std::vector<double>& h, int band) {
    size_t ns = ipow(G, d);
    std::vector<std::vector<cplx>> out(ns);
    std::vector<double> s(G);
    for (size_t p = 0; p < ns; ++p) {
        std::copy(h.begin() + p * G, h.begin() + (p + 1) * G, s.begin());
        auto c = rfft(s);
        c.resize(band + 1);
        out[p] = std::move(c);
    }
    return out;
}

double slice_eval(const std::vector<cplx>& c, double x) {
    cplx e(std::cos(x), std::sin(x)), z = e, acc(0.0);
    for (size_t j = 1; j < c.size(); ++j) {
        acc += c[j] * z;
        z *= e;
    }
    return c[0].real() + 2.0 * acc.real();
}

}  // namespace

std::vector<double> grid_shift_eval(int d, int G, const std::vector<double>& h, const std::vector<double>& shift,
                                    int band) {
    check_grid(d, G, h.size());
    check_grid(d, G, shift.size());
    band = std::min(band, G / 2 - 1);
    auto sc = slice_coeffs(d, G, h, band);
    std::vector<double> out(h.size());
    for (size_t p = 0; p < sc.size(); ++p)
        for (int m = 0; m < G; ++m) {
            size_t k = p * G + m;
            out[k] = slice_eval(sc[p], 2.0 * pi * m / G + shift[k]);
        }
    return out;
}

namespace {

// yhat(phi, y) with theta = y + yhat solving theta + g(phi, theta) = y, on the grid
std::vector<double> inverse_shift(int d, int G, const std::vector<double>& g, int band) {
    band = std::min(band, G / 2 - 1);
    auto sc = slice_coeffs(d, G, g, band);
    std::vector<double> out(g.size());
    for (size_t p = 0; p < sc.size(); ++p)
        for (int m = 0; m < G; ++m) {
            double y = 2.0 * pi * m / G, th = y;
            int it = 0;
            for (; it < 200; ++it) {
                double nx = y - slice_eval(sc[p], th);
                double dlt = std::abs(nx - th);
                th = nx;
                if (dlt < 1e-13) break;
            }
            if (it == 200) throw KamError("inverse change of variables did not converge");
            out[p * G + m] = th - y;
        }
    return out;
}

std::vector<double> mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(a.size());
    for (size_t k = 0; k < a.size(); ++k) c[k] = a[k] * b[k];
    return c;
}

std::vector<double> one_plus(std::vector<double> a) {
    for (double& x : a) x += 1.0;
    return a;
}

}  // namespace

// ---------------------------------------------------------------- TorusFunction

TorusFunction::TorusFunction(int d, int Ncap) : d_(d), N_(Ncap), W_(2 * Ncap + 1) {
    if (d < 1) throw std::invalid_argument("torus dimension d must be >= 1");
    if (Ncap < 1) throw std::invalid_argument("N_cap must be >= 1");
    size_t n = ipow(W_, d + 1);
    c_.assign(n, cplx(0.0));
    mask_.assign(n, 0);
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < n; ++k) {
        decode(k, l, j);
        mask_[k] = bracket_lj(l, j) <= N_;
    }
}

void TorusFunction::decode(size_t k, std::vector<int>& l, int& j) const {
    l.assign(d_, 0);
    j = int(k % W_) - N_;
    k /= W_;
    for (int a = d_ - 1; a >= 0; --a) {
        l[a] = int(k % W_) - N_;
        k /= W_;
    }
}

size_t TorusFunction::index(const std::vector<int>& l, int j) const {
    size_t k = 0;
    for (int v : l) k = k * W_ + size_t(v + N_);
    return k * W_ + size_t(j + N_);
}

bool TorusFunction::in_range(const std::vector<int>& l, int j) const {
    if (int(l.size()) != d_) throw std::invalid_argument("mode has the wrong dimension");
    return bracket_lj(l, j) <= N_;
}

cplx TorusFunction::get(const std::vector<int>& l, int j) const {
    return in_range(l, j) ? c_[index(l, j)] : cplx(0.0);
}

void TorusFunction::set(const std::vector<int>& l, int j, cplx v) {
    if (!in_range(l, j)) throw std::out_of_range("mode outside N_cap");
    c_[index(l, j)] = v;
}

double TorusFunction::mean() const { return c_[c_.size() / 2].real(); }

double TorusFunction::sobolev_norm(double s) const {
    std::vector<int> l;
    int j;
    double acc = 0.0;
    for (size_t k = 0; k < c_.size(); ++k) {
        if (!mask_[k] || c_[k] == cplx(0.0)) continue;
        decode(k, l, j);
        acc += std::pow(double(bracket_lj(l, j)), 2.0 * s) * std::norm(c_[k]);
    }
    return std::sqrt(acc);
}

double TorusFunction::sup_coeff() const {
    double m = 0.0;
    for (const auto& v : c_) m = std::max(m, std::abs(v));
    return m;
}

TorusFunction TorusFunction::d_theta() const {
    TorusFunction o = *this;
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < c_.size(); ++k) {
        decode(k, l, j);
        o.c_[k] *= cplx(0.0, j);
    }
    return o;
}

TorusFunction TorusFunction::omega_d_phi(const std::vector<double>& omega) const {
    if (int(omega.size()) != d_) throw std::invalid_argument("omega has the wrong dimension");
    TorusFunction o = *this;
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < c_.size(); ++k) {
        decode(k, l, j);
        o.c_[k] *= cplx(0.0, dot(omega, l));
    }
    return o;
}

TorusFunction TorusFunction::project(int N) const {
    TorusFunction o = *this;
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < c_.size(); ++k) {
        decode(k, l, j);
        if (bracket_lj(l, j) > N) o.c_[k] = 0.0;
    }
    return o;
}

TorusFunction TorusFunction::project_perp(int N) const { return *this - project(N); }

double TorusFunction::reality_defect() const {
    double m = 0.0;
    for (size_t k = 0; k < c_.size(); ++k) m = std::max(m, std::abs(c_[c_.size() - 1 - k] - std::conj(c_[k])));
    return m;
}

double TorusFunction::parity_defect(int parity) const {
    double m = 0.0;
    for (size_t k = 0; k < c_.size(); ++k) m = std::max(m, std::abs(c_[c_.size() - 1 - k] - double(parity) * c_[k]));
    return m;
}

std::vector<double> TorusFunction::grid(int G) const {
    if (G <= 2 * N_) throw std::invalid_argument("grid too coarse for N_cap");
    std::vector<cplx> c(ipow(G, d_ + 1), cplx(0.0));
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < c_.size(); ++k) {
        if (!mask_[k]) continue;
        decode(k, l, j);
        c[grid_pos(l, j, G)] = c_[k];
    }
    return grid_ifft(d_, G, c);
}

TorusFunction TorusFunction::from_grid(int d, int Ncap, int G, const std::vector<double>& v) {
    TorusFunction f(d, Ncap);
    if (G <= 2 * Ncap) throw std::invalid_argument("grid too coarse for N_cap");
    auto c = grid_fft(d, G, v);
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < f.c_.size(); ++k) {
        if (!f.mask_[k]) continue;
        f.decode(k, l, j);
        f.c_[k] = c[grid_pos(l, j, G)];
    }
    return f;
}

double TorusFunction::tail_fraction(int d, int Ncap, int G, const std::vector<double>& v) {
    auto c = grid_fft(d, G, v);
    std::vector<int> l;
    int j;
    double all = 0.0, tail = 0.0;
    for (size_t k = 0; k < c.size(); ++k) {
        grid_modes(k, d, G, l, j);
        double e = std::norm(c[k]);
        all += e;
        if (bracket_lj(l, j) > Ncap) tail += e;
    }
    return all > 0.0 ? std::sqrt(tail / all) : 0.0;
}

TorusFunction& TorusFunction::operator+=(const TorusFunction& o) {
    if (o.d_ != d_ || o.N_ != N_) throw std::invalid_argument("TorusFunction shape mismatch");
    for (size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
}

TorusFunction& TorusFunction::operator-=(const TorusFunction& o) {
    if (o.d_ != d_ || o.N_ != N_) throw std::invalid_argument("TorusFunction shape mismatch");
    for (size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
}

TorusFunction& TorusFunction::operator*=(double a) {
    for (auto& v : c_) v *= a;
    return *this;
}

// ---------------------------------------------------------------- transport reduction

namespace {

double transport_chi(double div, const std::vector<int>& l, int j, const DiophantineParams& dio) {
    return chi(div * std::pow(bracket(l), dio.tau1) / (std::pow(dio.gamma, dio.upsilon) * bracket_j(j)));
}

}  // namespace

HomologicalResult solve_transport_homological(double V, const TorusFunction& f, const std::vector<double>& omega,
                                              int N, const DiophantineParams& dio) {
    if (int(omega.size()) != f.d()) throw std::invalid_argument("omega has the wrong dimension");
    if (N < 1) throw std::invalid_argument("truncation N must be >= 1");
    HomologicalResult res{TorusFunction(f.d(), f.Ncap()), {}};
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < f.size(); ++k) {
        if (!f.masked(k)) continue;
        f.decode(k, l, j);
        int b = bracket_lj(l, j);
        bool zero = (j == 0 && std::all_of(l.begin(), l.end(), [](int v) { return v == 0; }));
        if (zero || b > N) continue;
        double div = dot(omega, l) + j * V;
        double x = transport_chi(div, l, j, dio);
        if (x < 1.0 && f.at(k) != cplx(0.0)) res.clipped.push_back({l, j});
        if (x > 0.0) res.g.at(k) = cplx(0.0, x) * f.at(k) / div;
    }
    return res;
}

double transport_homological_residual(double V, const TorusFunction& f, const TorusFunction& g,
                                      const std::vector<double>& omega, int N, const DiophantineParams& dio) {
    TorusFunction r = g.omega_d_phi(omega) + V * g.d_theta() + f.project(N);
    std::vector<int> l;
    int j;
    double m = 0.0;
    for (size_t k = 0; k < r.size(); ++k) {
        if (!r.masked(k)) continue;
        r.decode(k, l, j);
        bool zero = (j == 0 && std::all_of(l.begin(), l.end(), [](int v) { return v == 0; }));
        if (zero || bracket_lj(l, j) > N) continue;
        if (transport_chi(dot(omega, l) + j * V, l, j, dio) < 1.0) continue;
        m = std::max(m, std::abs(r.at(k)));
    }
    return m;
}

TransportOptions TransportOptions::defaults(int d) {
    TransportOptions o;
    o.fill(d);
    return o;
}

void TransportOptions::fill(int d) {
    if (Ncap == 0) Ncap = d == 1 ? 40 : 21;
    if (G == 0) G = d == 1 ? 128 : 64;
    if (s0 == 0.0) s0 = std::ceil((d + 1) / 2.0 + 2.0);
    if (s_high == 0.0) s_high = s0 + 10.0;
    if (G <= 3 * Ncap) throw std::invalid_argument("grid must exceed 3 N_cap to de-alias products");
}

int schedule_N(int N0, int m, int Ncap) {
    if (N0 < 1 || m < 0) throw std::invalid_argument("schedule_N: bad arguments");
    double v = std::pow(double(N0), std::pow(1.5, m));
    return v >= Ncap ? Ncap : int(std::floor(v + 1e-9));
}

TransportStep transport_kam_step(const TransportIterate& it, const std::vector<double>& omega, int N,
                                 const DiophantineParams& dio, const TransportOptions& opt0) {
    TransportOptions opt = opt0;
    const int d = it.f.d();
    opt.fill(d);
    if (it.f.Ncap() != opt.Ncap) throw std::invalid_argument("perturbation N_cap does not match the options");
    const int G = opt.G;

    auto hom = solve_transport_homological(it.V, it.f, omega, N, dio);
    TransportStep st;
    st.g = hom.g;
    st.clipped = int(hom.clipped.size());

    TorusFunction gt = hom.g.d_theta();
    auto gt_grid = gt.grid(G);
    for (double v : gt_grid) st.max_dtheta_g = std::max(st.max_dtheta_g, std::abs(v));
    if (!(st.max_dtheta_g < 1.0)) throw KamError("change of variables is not invertible (|d_theta g| >= 1)");

    // f - <f> + omega.d_phi g + V d_theta g vanishes on unclipped modes; assemble it modewise
    TorusFunction lin = it.f + hom.g.omega_d_phi(omega) + it.V * gt;
    lin.set(std::vector<int>(d, 0), 0, 0.0);
    auto h = lin.grid(G);
    auto fg = mul(it.f.grid(G), gt_grid);
    for (size_t k = 0; k < h.size(); ++k) h[k] += fg[k];

    auto yhat = inverse_shift(d, G, hom.g.grid(G), N);
    auto hp = grid_shift_eval(d, G, h, yhat, G / 2 - 1);

    st.next.V = it.V + it.f.mean();
    st.next.f = TorusFunction::from_grid(d, opt.Ncap, G, hp);
    st.next.m = it.m + 1;
    st.next.history = it.history;
    st.tail_fraction = TorusFunction::tail_fraction(d, opt.Ncap, G, hp);
    return st;
}

namespace {

// T_{V,f} u = omega.d_phi u + d_theta((V + f) u) on grid values
std::vector<double> transport_apply(int d, int G, double V, const std::vector<double>& f, const std::vector<double>& u,
                                    const std::vector<double>& omega) {
    std::vector<double> w(u.size());
    for (size_t k = 0; k < u.size(); ++k) w[k] = (V + f[k]) * u[k];
    auto a = grid_omega_d_phi(d, G, u, omega);
    auto b = grid_d_theta(d, G, w);
    for (size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    return a;
}

// (1 + d_theta s) u(theta + s)
std::vector<double> push(int d, int G, const std::vector<double>& s, const std::vector<double>& u) {
    return mul(one_plus(grid_d_theta(d, G, s)), grid_shift_eval(d, G, u, s, G / 2 - 1));
}

}  // namespace

double transport_conjugation_residual(double V, const TorusFunction& f, const TorusFunction& g, double Vp,
                                      const TorusFunction& fp, const std::vector<double>& omega,
                                      const TorusFunction& rho, int G) {
    const int d = f.d();
    auto gg = g.grid(G), rg = rho.grid(G);
    auto lhs = transport_apply(d, G, V, f.grid(G), push(d, G, gg, rg), omega);
    auto rhs = push(d, G, gg, transport_apply(d, G, Vp, fp.grid(G), rg, omega));
    for (size_t k = 0; k < lhs.size(); ++k) lhs[k] -= rhs[k];
    return grid_l2(lhs) / grid_l2(rg);
}

double straightening_residual(double V0, const TorusFunction& f0, const TorusFunction& beta, double c,
                              const std::vector<double>& omega, const TorusFunction& rho, int G) {
    const int d = f0.d();
    auto bg = beta.grid(G), rg = rho.grid(G);
    std::vector<double> zero(rg.size(), 0.0);
    auto lhs = transport_apply(d, G, V0, f0.grid(G), push(d, G, bg, rg), omega);
    auto rhs = push(d, G, bg, transport_apply(d, G, c, zero, rg, omega));
    for (size_t k = 0; k < lhs.size(); ++k) lhs[k] -= rhs[k];
    return grid_l2(lhs) / grid_l2(rg);
}

TorusFunction manufactured_perturbation(int d, int Ncap, double delta0, double gamma, double s0, double sigma,
                                        std::uint64_t seed) {
    if (!(delta0 > 0.0)) throw std::invalid_argument("delta0 must be positive");
    TorusFunction f(d, Ncap);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.5, 1.0);
    std::vector<int> l;
    int j;
    const size_t n = f.size();
    for (size_t k = 0; k < n; ++k) {
        size_t kn = n - 1 - k;
        if (kn < k || !f.masked(k)) continue;
        f.decode(k, l, j);
        double v = std::exp(-sigma * bracket_lj(l, j)) * U(rng);
        f.at(k) = v;
        f.at(kn) = v;
    }
    f *= delta0 * gamma / f.sobolev_norm(s0);
    return f;
}

TorusFunction random_test_function(int d, int Ncap, int K, std::uint64_t seed) {
    TorusFunction f(d, Ncap);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<int> l;
    int j;
    const size_t n = f.size();
    for (size_t k = 0; k < n; ++k) {
        size_t kn = n - 1 - k;
        if (kn < k || !f.masked(k)) continue;
        f.decode(k, l, j);
        if (bracket_lj(l, j) > K) continue;
        cplx v(U(rng), kn == k ? 0.0 : U(rng));
        f.at(k) = v;
        f.at(kn) = std::conj(v);
    }
    return f;
}

TransportRun transport_kam_run(const TorusFunction& f0, double V0, const std::vector<double>& omega,
                               const DiophantineParams& dio, int n_steps, const TransportOptions& opt0,
                               std::uint64_t seed) {
    const int d = f0.d();
    dio.validate(d);
    if (n_steps < 0) throw std::invalid_argument("number of steps must be nonnegative");
    TransportOptions opt = opt0;
    opt.fill(d);
    const int G = opt.G;
    auto rho = random_test_function(d, opt.Ncap, 3, seed + 1);

    TransportRun run;
    run.beta = TorusFunction(d, opt.Ncap);
    TransportIterate it{V0, f0, 0, {}};
    int increases = 0;
    for (int m = 0;; ++m) {
        auto t0 = std::chrono::steady_clock::now();
        StepRecord rec;
        rec.m = m;
        rec.N = schedule_N(dio.N0, m, opt.Ncap);
        rec.delta_s0 = it.f.sobolev_norm(opt.s0) / dio.gamma;
        rec.delta_shigh = it.f.sobolev_norm(opt.s_high) / dio.gamma;
        rec.mean_f = it.f.mean();
        rec.straightening_residual = straightening_residual(V0, f0, run.beta, it.V, omega, rho, G);
        if (!std::isfinite(rec.delta_s0)) throw KamError("non-finite perturbation norm at step " + std::to_string(m));
        if (m > 0) {
            increases = rec.delta_s0 > run.history.back().delta_s0 ? increases + 1 : 0;
            if (increases >= 2) throw KamError("KAM iteration diverged at step " + std::to_string(m));
        }
        if (m == n_steps) {
            rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            run.history.push_back(rec);
            break;
        }
        auto st = transport_kam_step(it, omega, rec.N, dio, opt);
        rec.clipped = st.clipped;
        run.sum_means += rec.mean_f;
        // beta_{m+1}(theta) = beta_m(theta) + g_m(theta + beta_m(theta))
        auto bg = run.beta.grid(G);
        auto gs = grid_shift_eval(d, G, st.g.grid(G), bg, G / 2 - 1);
        for (size_t k = 0; k < bg.size(); ++k) bg[k] += gs[k];
        run.beta = TorusFunction::from_grid(d, opt.Ncap, G, bg);
        it = std::move(st.next);
        rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.history.push_back(rec);
    }
    run.c = it.V;
    return run;
}

// ---------------------------------------------------------------- Toeplitz operators

ToeplitzOperator::ToeplitzOperator(int d, int Ncap, std::vector<int> modes)
    : d_(d), N_(Ncap), W_(2 * Ncap + 1), modes_(std::move(modes)) {
    if (d < 1 || Ncap < 0) throw std::invalid_argument("ToeplitzOperator: bad shape");
    std::sort(modes_.begin(), modes_.end());
    if (std::adjacent_find(modes_.begin(), modes_.end()) != modes_.end())
        throw std::invalid_argument("ToeplitzOperator: repeated mode");
    for (int j : modes_)
        if (std::find(modes_.begin(), modes_.end(), -j) == modes_.end())
            throw std::invalid_argument("ToeplitzOperator: mode set must be symmetric");
    size_t nb = ipow(W_, d);
    blocks_.assign(nb, Eigen::MatrixXcd::Zero(n(), n()));
    pmask_.assign(nb, 0);
    for (size_t b = 0; b < nb; ++b) pmask_[b] = block_index(p_of(b)) >= 0;
}

int ToeplitzOperator::mode_index(int j) const {
    auto it = std::lower_bound(modes_.begin(), modes_.end(), j);
    return (it != modes_.end() && *it == j) ? int(it - modes_.begin()) : -1;
}

std::vector<int> ToeplitzOperator::p_of(size_t b) const {
    std::vector<int> p(d_);
    for (int a = d_ - 1; a >= 0; --a) {
        p[a] = int(b % W_) - N_;
        b /= W_;
    }
    return p;
}

long ToeplitzOperator::block_index(const std::vector<int>& p) const {
    if (int(p.size()) != d_) throw std::invalid_argument("p has the wrong dimension");
    long k = 0;
    int s = 0;
    for (int v : p) {
        if (std::abs(v) > N_) return -1;
        s += std::abs(v);
        k = k * W_ + (v + N_);
    }
    return s <= N_ ? k : -1;
}

cplx ToeplitzOperator::get(const std::vector<int>& p, int j, int j0) const {
    long b = block_index(p);
    int a = mode_index(j), c = mode_index(j0);
    if (b < 0 || a < 0 || c < 0) return 0.0;
    return blocks_[b](a, c);
}

void ToeplitzOperator::set(const std::vector<int>& p, int j, int j0, cplx v) {
    long b = block_index(p);
    int a = mode_index(j), c = mode_index(j0);
    if (b < 0 || a < 0 || c < 0) throw std::out_of_range("ToeplitzOperator::set: entry out of range");
    blocks_[b](a, c) = v;
}

ToeplitzOperator ToeplitzOperator::project(int N) const {
    ToeplitzOperator o = *this;
    for (size_t b = 0; b < blocks_.size(); ++b)
        if (!is_within(p_of(b), N)) o.blocks_[b].setZero();
    return o;
}

ToeplitzOperator ToeplitzOperator::project_perp(int N) const { return *this - project(N); }

ToeplitzOperator ToeplitzOperator::diagonal_part() const {
    ToeplitzOperator o(d_, N_, modes_);
    size_t c = blocks_.size() / 2;
    o.blocks_[c] = blocks_[c].diagonal().asDiagonal();
    return o;
}

double ToeplitzOperator::max_abs() const {
    double m = 0.0;
    for (const auto& B : blocks_) m = std::max(m, B.cwiseAbs().maxCoeff());
    return m;
}

double ToeplitzOperator::reality_defect() const {
    // block index of -p is nb-1-b; mode index of -j is n-1-a (symmetric sorted set)
    double m = 0.0;
    const size_t nb = blocks_.size();
    const int nn = n();
    for (size_t b = 0; b < nb; ++b)
        for (int a = 0; a < nn; ++a)
            for (int c = 0; c < nn; ++c)
                m = std::max(m, std::abs(blocks_[nb - 1 - b](nn - 1 - a, nn - 1 - c) - std::conj(blocks_[b](a, c))));
    return m;
}

double ToeplitzOperator::imaginary_defect() const {
    double m = 0.0;
    for (const auto& B : blocks_) m = std::max(m, B.real().cwiseAbs().maxCoeff());
    return m;
}

void ToeplitzOperator::symmetrize() {
    const size_t nb = blocks_.size();
    const int nn = n();
    auto old = blocks_;
    for (size_t b = 0; b < nb; ++b)
        for (int a = 0; a < nn; ++a)
            for (int c = 0; c < nn; ++c) {
                cplx v = 0.5 * (old[b](a, c) + std::conj(old[nb - 1 - b](nn - 1 - a, nn - 1 - c)));
                blocks_[b](a, c) = cplx(0.0, v.imag());
            }
}

ToeplitzOperator operator*(const ToeplitzOperator& A, const ToeplitzOperator& B) {
    if (A.d_ != B.d_ || A.N_ != B.N_ || A.modes_ != B.modes_) throw std::invalid_argument("Toeplitz shape mismatch");
    ToeplitzOperator C(A.d_, A.N_, A.modes_);
    std::vector<char> nzA(A.blocks_.size()), nzB(B.blocks_.size());
    for (size_t b = 0; b < A.blocks_.size(); ++b) {
        nzA[b] = A.pmask_[b] && !A.blocks_[b].isZero(0.0);
        nzB[b] = B.pmask_[b] && !B.blocks_[b].isZero(0.0);
    }
    for (size_t a = 0; a < A.blocks_.size(); ++a) {
        if (!nzA[a]) continue;
        auto q = A.p_of(a);
        for (size_t b = 0; b < B.blocks_.size(); ++b) {
            if (!nzB[b]) continue;
            auto p = B.p_of(b);
            for (int k = 0; k < A.d_; ++k) p[k] += q[k];
            long c = C.block_index(p);
            if (c < 0) continue;
            C.blocks_[c].noalias() += A.blocks_[a] * B.blocks_[b];
        }
    }
    return C;
}

ToeplitzOperator& ToeplitzOperator::operator+=(const ToeplitzOperator& o) {
    if (o.d_ != d_ || o.N_ != N_ || o.modes_ != modes_) throw std::invalid_argument("Toeplitz shape mismatch");
    for (size_t b = 0; b < blocks_.size(); ++b) blocks_[b] += o.blocks_[b];
    return *this;
}

ToeplitzOperator& ToeplitzOperator::operator-=(const ToeplitzOperator& o) {
    if (o.d_ != d_ || o.N_ != N_ || o.modes_ != modes_) throw std::invalid_argument("Toeplitz shape mismatch");
    for (size_t b = 0; b < blocks_.size(); ++b) blocks_[b] -= o.blocks_[b];
    return *this;
}

ToeplitzOperator& ToeplitzOperator::operator*=(cplx a) {
    for (auto& B : blocks_) B *= a;
    return *this;
}

double offdiag_norm(const ToeplitzOperator& R, double s) {
    // sup over j - j0 = m for each (p, m)
    std::map<std::pair<long, int>, double> sup;
    const auto& md = R.modes();
    for (size_t b = 0; b < R.n_blocks(); ++b) {
        const auto& B = R.block(b);
        for (int a = 0; a < R.n(); ++a)
            for (int c = 0; c < R.n(); ++c) {
                double v = std::abs(B(a, c));
                if (v == 0.0) continue;
                auto& e = sup[{long(b), md[a] - md[c]}];
                e = std::max(e, v);
            }
    }
    double acc = 0.0;
    for (const auto& [key, v] : sup) {
        auto p = R.p_of(size_t(key.first));
        double w = std::max(bracket(p), bracket_j(key.second));
        acc += std::pow(w, 2.0 * s) * v * v;
    }
    return std::sqrt(acc);
}

namespace {

double mu_of(const DiagonalSpectrum& mu, int j) {
    auto it = mu.find(j);
    if (it == mu.end()) throw std::invalid_argument("mode " + std::to_string(j) + " missing from the spectrum");
    return it->second;
}

double remainder_chi(double div, const std::vector<int>& p, int m, const DiophantineParams& dio) {
    return chi(div * std::pow(bracket(p), dio.tau2) / (dio.gamma * bracket_j(m)));
}

bool is_zero(const std::vector<int>& p) {
    return std::all_of(p.begin(), p.end(), [](int v) { return v == 0; });
}

}  // namespace

RemainderHomological solve_remainder_homological(const DiagonalSpectrum& mu, const ToeplitzOperator& R,
                                                 const std::vector<double>& omega, int N,
                                                 const DiophantineParams& dio) {
    if (int(omega.size()) != R.d()) throw std::invalid_argument("omega has the wrong dimension");
    RemainderHomological res{ToeplitzOperator(R.d(), R.Ncap(), R.modes()), 0};
    const auto& md = R.modes();
    for (size_t b = 0; b < R.n_blocks(); ++b) {
        auto p = R.p_of(b);
        if (R.block_index(p) < 0 || bracket(p) > N) continue;
        bool p0 = is_zero(p);
        double wp = dot(omega, p);
        for (int a = 0; a < R.n(); ++a)
            for (int c = 0; c < R.n(); ++c) {
                if (p0 && a == c) continue;
                cplx r = R.block(b)(a, c);
                if (r == cplx(0.0)) continue;
                double div = wp + mu_of(mu, md[a]) - mu_of(mu, md[c]);
                double x = remainder_chi(div, p, md[a] - md[c], dio);
                if (x < 1.0) ++res.clipped;
                if (x > 0.0) res.Psi.block(b)(a, c) = cplx(0.0, x) * r / div;
            }
    }
    return res;
}

namespace {

// [omega.d_phi + i D, Psi] + P_N R - floor(P_N R), entrywise; only_unclipped drops entries with chi < 1
ToeplitzOperator commutator_error(const DiagonalSpectrum& mu, const ToeplitzOperator& R, const ToeplitzOperator& Psi,
                                  const std::vector<double>& omega, int N, const DiophantineParams& dio,
                                  bool only_unclipped) {
    ToeplitzOperator E(R.d(), R.Ncap(), R.modes());
    const auto& md = R.modes();
    for (size_t b = 0; b < R.n_blocks(); ++b) {
        auto p = R.p_of(b);
        if (R.block_index(p) < 0 || bracket(p) > N) continue;
        bool p0 = is_zero(p);
        double wp = dot(omega, p);
        for (int a = 0; a < R.n(); ++a)
            for (int c = 0; c < R.n(); ++c) {
                if (p0 && a == c) continue;
                double div = wp + mu_of(mu, md[a]) - mu_of(mu, md[c]);
                if (only_unclipped && remainder_chi(div, p, md[a] - md[c], dio) < 1.0) continue;
                E.block(b)(a, c) = cplx(0.0, div) * Psi.block(b)(a, c) + R.block(b)(a, c);
            }
    }
    return E;
}

}  // namespace

double commutator_residual(const DiagonalSpectrum& mu, const ToeplitzOperator& R, const ToeplitzOperator& Psi,
                           const std::vector<double>& omega, int N, const DiophantineParams& dio) {
    return commutator_error(mu, R, Psi, omega, N, dio, true).max_abs();
}

RemainderStep remainder_kam_step(const DiagonalSpectrum& mu, const ToeplitzOperator& R,
                                 const std::vector<double>& omega, int N, const DiophantineParams& dio, double s0) {
    RemainderStep st;
    ToeplitzOperator PN = R.project(N);
    ToeplitzOperator D = PN.diagonal_part();
    st.mu = mu;
    const auto& md = R.modes();
    size_t c0 = R.n_blocks() / 2;
    for (int a = 0; a < R.n(); ++a) st.mu[md[a]] = mu_of(mu, md[a]) + (cplx(0.0, -1.0) * D.block(c0)(a, a)).real();

    auto hom = solve_remainder_homological(mu, R, omega, N, dio);
    st.Psi = hom.Psi;
    st.clipped = hom.clipped;
    st.psi_norm = offdiag_norm(st.Psi, s0);
    if (!(st.psi_norm < 0.5)) throw KamError("homological solution too large for the Neumann series");

    ToeplitzOperator E = commutator_error(mu, R, st.Psi, omega, N, dio, false);
    ToeplitzOperator X = R.project_perp(N) + R * st.Psi - st.Psi * D + E;

    // (I + Psi)^{-1} X = sum_k (-Psi)^k X
    ToeplitzOperator acc = X, term = X;
    double x0 = std::max(X.max_abs(), 1e-300);
    ToeplitzOperator mPsi = st.Psi;
    mPsi *= -1.0;
    for (st.neumann_terms = 1; st.neumann_terms < 60; ++st.neumann_terms) {
        term = mPsi * term;
        acc += term;
        if (term.max_abs() < 1e-18 * x0) break;
    }
    double defect = std::max(acc.reality_defect(), acc.imaginary_defect());
    if (defect > 1e-12) throw KamError("remainder lost its reality/reversibility structure (defect " +
                                       std::to_string(defect) + ")");
    acc.symmetrize();
    st.R = acc;
    return st;
}

RemainderRun remainder_kam_run(const DiagonalSpectrum& mu0, const ToeplitzOperator& R0,
                               const std::vector<double>& omega, const DiophantineParams& dio, int n_steps,
                               double s0) {
    dio.validate(R0.d());
    if (n_steps < 0) throw std::invalid_argument("number of steps must be nonnegative");
    RemainderRun run;
    run.mu0 = mu0;
    DiagonalSpectrum mu = mu0;
    ToeplitzOperator R = R0;
    int increases = 0;
    for (int m = 0;; ++m) {
        auto t0 = std::chrono::steady_clock::now();
        RemainderRecord rec;
        rec.m = m;
        rec.N = schedule_N(dio.N0, m, std::max(1, R0.Ncap()));
        rec.offdiag_s0 = offdiag_norm(R, s0);
        rec.symmetry_defect = std::max(R.reality_defect(), R.imaginary_defect());
        if (!std::isfinite(rec.offdiag_s0)) throw KamError("non-finite remainder norm");
        if (m > 0) {
            increases = rec.offdiag_s0 > run.history.back().offdiag_s0 ? increases + 1 : 0;
            if (increases >= 2) throw KamError("remainder reduction diverged at step " + std::to_string(m));
        }
        if (m == n_steps) {
            run.history.push_back(rec);
            break;
        }
        auto st = remainder_kam_step(mu, R, omega, rec.N, dio, s0);
        rec.psi_norm = st.psi_norm;
        rec.clipped = st.clipped;
        mu = st.mu;
        R = st.R;
        rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.history.push_back(rec);
    }
    run.mu_inf = mu;
    run.R_final = R;
    return run;
}

DiagonalInverse invert_diagonal(const DiagonalSpectrum& mu, const std::vector<double>& omega,
                                const TorusFunction& rhs, int N, const DiophantineParams& dio) {
    if (int(omega.size()) != rhs.d()) throw std::invalid_argument("omega has the wrong dimension");
    DiagonalInverse res{TorusFunction(rhs.d(), rhs.Ncap()), {}};
    std::vector<int> l;
    int j;
    for (size_t k = 0; k < rhs.size(); ++k) {
        if (!rhs.masked(k) || rhs.at(k) == cplx(0.0)) continue;
        rhs.decode(k, l, j);
        auto it = mu.find(j);
        if (it == mu.end()) throw std::invalid_argument("right-hand side has a component on a non-normal mode");
        if (bracket_lj(l, j) > N) continue;
        double div = dot(omega, l) + it->second;
        double x = chi(div * std::pow(bracket(l), dio.tau1) / (dio.gamma * bracket_j(j)));
        if (x < 1.0) res.clipped.push_back({l, j});
        if (x > 0.0) res.u.at(k) = x * rhs.at(k) / cplx(0.0, div);
    }
    return res;
}

ContourRemainder remainder_from_contour(double lambda, double Omega, int j1, double eps, int Jmax, int Ncap, int M,
                                        int P) {
    if (j1 < 1 || Jmax < j1 || Jmax >= M / 2) throw std::invalid_argument("remainder_from_contour: bad mode range");
    if (P <= 2 * Ncap) throw std::invalid_argument("remainder_from_contour: phi grid too coarse for N_cap");
    spectrum::SpectrumContext ctx;
    ctx.lambda = lambda;
    ctx.Omega = Omega;
    ctx.sites = {j1};
    ctx.validate();

    ContourRemainder out;
    out.omega = {spectrum::omega_j(ctx, j1)};
    std::vector<int> modes;
    for (int j = -Jmax; j <= Jmax; ++j)
        if (j != 0 && std::abs(j) != j1) {
            modes.push_back(j);
            out.mu0[j] = spectrum::omega_j(ctx, j);
        }
    out.R0 = ToeplitzOperator(1, Ncap, modes);
    const int n = int(modes.size());

    Eigen::MatrixXcd F(n, M), E(M, n);
    for (int a = 0; a < n; ++a)
        for (int m = 0; m < M; ++m) {
            double th = 2.0 * pi * m / M;
            F(a, m) = std::polar(1.0 / M, -modes[a] * th) * cplx(0.0, -modes[a]);
            E(m, a) = std::polar(1.0, modes[a] * th);
        }
    const Eigen::MatrixXd Q0 = contour::kernel_matrix(contour::kernel_split(FourierCurve(M), lambda));
    for (int q = 0; q < P; ++q) {
        double phi = 2.0 * pi * q / P;
        // r(phi, theta) = eps cos(j1 theta - phi)
        FourierCurve r = FourierCurve::cosine(M, j1, eps, phi);
        Eigen::MatrixXd dQ = contour::kernel_matrix(contour::kernel_split(r, lambda)) - Q0;
        Eigen::MatrixXcd A = F * dQ.cast<cplx>() * E;
        for (int p = -Ncap; p <= Ncap; ++p) out.R0.block(size_t(p + Ncap)) += A * std::polar(1.0 / P, -p * phi);
    }
    out.R0.symmetrize();
    return out;
}

}  // namespace qgvp::kam
