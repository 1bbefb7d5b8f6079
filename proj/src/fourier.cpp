#include "qgvp/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace qgvp {

namespace {

struct Plan {
    int M;
    double* in;
    fftw_complex* out;
    fftw_plan fwd, bwd;
    std::mutex mu;

    explicit Plan(int m) : M(m) {
        in = fftw_alloc_real(M);
        out = fftw_alloc_complex(M / 2 + 1);
        fwd = fftw_plan_dft_r2c_1d(M, in, out, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_1d(M, out, in, FFTW_ESTIMATE);
    }
    ~Plan() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(in);
        fftw_free(out);
    }
};

Plan& plan_for(int M) {
    static std::map<int, std::unique_ptr<Plan>> plans;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto& p = plans[M];
    if (!p) p = std::make_unique<Plan>(M);
    return *p;
}

void check_size(int M) {
    if (M < 4 || M % 2) throw std::invalid_argument("FFT size must be even and >= 4");
}

}  // namespace

std::vector<cplx> rfft(const std::vector<double>& v) {
    int M = int(v.size());
    check_size(M);
    Plan& p = plan_for(M);
    std::lock_guard<std::mutex> lock(p.mu);
    std::copy(v.begin(), v.end(), p.in);
    fftw_execute(p.fwd);
    std::vector<cplx> c(M / 2 + 1);
    for (int j = 0; j <= M / 2; ++j) c[j] = cplx(p.out[j][0], p.out[j][1]) / double(M);
    return c;
}

std::vector<double> irfft(const std::vector<cplx>& c, int M) {
    check_size(M);
    Plan& p = plan_for(M);
    std::lock_guard<std::mutex> lock(p.mu);
    for (int j = 0; j <= M / 2; ++j) {
        cplx v = j < int(c.size()) ? c[j] : cplx(0.0);
        if (j == 0 || j == M / 2) v = cplx(v.real(), 0.0);
        p.out[j][0] = v.real();
        p.out[j][1] = v.imag();
    }
    fftw_execute(p.bwd);
    return std::vector<double>(p.in, p.in + M);
}

FourierCurve::FourierCurve(int M) : M_(M), c_(M / 2, cplx(0.0)) { check_size(M); }

FourierCurve FourierCurve::from_grid(const std::vector<double>& v) {
    FourierCurve r(int(v.size()));
    auto c = rfft(v);
    for (int j = 1; j < r.M_ / 2; ++j) r.c_[j] = c[j];
    return r;
}

FourierCurve FourierCurve::cosine(int M, int j, double amp, double phase) {
    FourierCurve r(M);
    r.set(j, 0.5 * amp * std::polar(1.0, -phase));
    return r;
}

cplx FourierCurve::coeff(int j) const {
    int a = std::abs(j);
    if (a == 0 || a >= M_ / 2) return 0.0;
    return j > 0 ? c_[a] : std::conj(c_[a]);
}

void FourierCurve::set(int j, cplx v) {
    if (j < 1 || j >= M_ / 2) throw std::out_of_range("FourierCurve::set: mode outside 1..M/2-1");
    c_[j] = v;
}

std::vector<double> FourierCurve::grid() const { return irfft(c_, M_); }

double FourierCurve::eval(double theta) const {
    double s = 0.0;
    for (int j = 1; j < M_ / 2; ++j) s += 2.0 * (c_[j] * std::polar(1.0, j * theta)).real();
    return s;
}

double FourierCurve::max_abs() const {
    auto g = grid();
    double m = 0.0;
    for (double v : g) m = std::max(m, std::abs(v));
    return m;
}

double FourierCurve::l2() const {
    double s = 0.0;
    for (int j = 1; j < M_ / 2; ++j) s += 2.0 * std::norm(c_[j]);
    return std::sqrt(s);
}

double FourierCurve::top_octave_fraction() const {
    double tot = 0.0, top = 0.0;
    for (int j = 1; j < M_ / 2; ++j) {
        tot += std::norm(c_[j]);
        if (j >= M_ / 4) top += std::norm(c_[j]);
    }
    return tot > 0.0 ? top / tot : 0.0;
}

FourierCurve FourierCurve::derivative() const {
    FourierCurve d(M_);
    for (int j = 1; j < M_ / 2; ++j) d.c_[j] = cplx(0.0, j) * c_[j];
    return d;
}

FourierCurve FourierCurve::shifted(double theta0) const {
    FourierCurve d(M_);
    for (int j = 1; j < M_ / 2; ++j) d.c_[j] = c_[j] * std::polar(1.0, -j * theta0);
    return d;
}

FourierCurve FourierCurve::reflected() const {
    FourierCurve d(M_);
    for (int j = 1; j < M_ / 2; ++j) d.c_[j] = std::conj(c_[j]);
    return d;
}

FourierCurve FourierCurve::resampled(int M) const {
    FourierCurve d(M);
    for (int j = 1; j < std::min(M, M_) / 2; ++j) d.c_[j] = c_[j];
    return d;
}

FourierCurve& FourierCurve::operator+=(const FourierCurve& o) {
    if (o.M_ != M_) throw std::invalid_argument("FourierCurve: grid size mismatch");
    for (int j = 1; j < M_ / 2; ++j) c_[j] += o.c_[j];
    return *this;
}

FourierCurve& FourierCurve::operator-=(const FourierCurve& o) {
    if (o.M_ != M_) throw std::invalid_argument("FourierCurve: grid size mismatch");
    for (int j = 1; j < M_ / 2; ++j) c_[j] -= o.c_[j];
    return *this;
}

FourierCurve& FourierCurve::operator*=(double a) {
    for (auto& v : c_) v *= a;
    return *this;
}

double max_abs_diff(const FourierCurve& a, const FourierCurve& b) { return (a - b).max_abs(); }

}  // namespace qgvp
