#pragma once

#include <complex>
#include <vector>

namespace qgvp {

using cplx = std::complex<double>;

// Real periodic FFT of length M on the nodes theta_m = 2 pi m / M.
// forward: c_j = (1/M) sum_m v_m e^{-i j theta_m}, j = 0..M/2.
std::vector<cplx> rfft(const std::vector<double>& v);
// inverse of rfft: v_m = sum_{j=-M/2+1}^{M/2} c_j e^{i j theta_m}, c_{-j} = conj(c_j);
// the Nyquist entry is taken real.
std::vector<double> irfft(const std::vector<cplx>& c, int M);

// Real zero-mean periodic function stored by its modes j = 1..M/2-1 (negative modes implied).
class FourierCurve {
public:
    FourierCurve() = default;
    explicit FourierCurve(int M);

    static FourierCurve from_grid(const std::vector<double>& v);  // drops mean and Nyquist
    static FourierCurve cosine(int M, int j, double amp, double phase = 0.0);  // amp cos(j th - phase)

    int grid_size() const { return M_; }
    int max_mode() const { return M_ / 2 - 1; }

    cplx coeff(int j) const;       // any sign; zero outside range
    void set(int j, cplx v);       // j >= 1
    const std::vector<cplx>& coeffs() const { return c_; }  // index j, entry 0 unused (zero)

    std::vector<double> grid() const;
    double eval(double theta) const;
    double max_abs() const;
    double l2() const;              // (normalized mean of r^2)^{1/2}
    // fraction of spectral energy in the top octave j >= M/4
    double top_octave_fraction() const;

    FourierCurve derivative() const;
    FourierCurve shifted(double theta0) const;  // r(. - theta0)
    FourierCurve reflected() const;             // r(-.)
    FourierCurve resampled(int M) const;

    FourierCurve& operator+=(const FourierCurve& o);
    FourierCurve& operator-=(const FourierCurve& o);
    FourierCurve& operator*=(double a);
    friend FourierCurve operator+(FourierCurve a, const FourierCurve& b) { return a += b; }
    friend FourierCurve operator-(FourierCurve a, const FourierCurve& b) { return a -= b; }
    friend FourierCurve operator*(double s, FourierCurve a) { return a *= s; }

private:
    int M_ = 0;
    std::vector<cplx> c_;
};

double max_abs_diff(const FourierCurve& a, const FourierCurve& b);

}  // namespace qgvp
