#include "qgvp/cantor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qgvp::cantor {

void DiophantineParams::validate(int d) const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
    if (!(tau1 > d)) throw std::invalid_argument("tau1 must exceed d");
    if (!(tau2 > tau1)) throw std::invalid_argument("tau2 must exceed tau1");
    if (!(upsilon > 0.0 && upsilon < 1.0)) throw std::invalid_argument("upsilon must lie in (0,1)");
    if (q0 < 0) throw std::invalid_argument("q0 must be nonnegative");
    if (upsilon > 1.0 / (q0 + 2) + 1e-15) throw std::invalid_argument("upsilon must be <= 1/(q0+2)");
    if (N0 < 4) throw std::invalid_argument("N0 must be >= 4");
}

DiophantineParams DiophantineParams::defaults(int d) {
    DiophantineParams p;
    p.tau1 = d + 0.5;
    p.tau2 = d + 1.5;
    return p;
}

double chi(double x) {
    x = std::abs(x);
    if (x <= 1.0 / 3.0) return 0.0;
    if (x >= 0.5) return 1.0;
    double t = (x - 1.0 / 3.0) * 6.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double bracket(const std::vector<int>& l) {
    long s = 0;
    for (int v : l) s += std::abs(v);
    return std::max(1.0, double(s));
}

double dot(const std::vector<double>& w, const std::vector<int>& l) {
    if (w.size() != l.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (size_t k = 0; k < w.size(); ++k) s += w[k] * l[k];
    return s;
}

bool first_melnikov_ok(const std::vector<double>& omega, double c, const std::vector<int>& l, int j,
                       const DiophantineParams& dio) {
    bool lz = std::all_of(l.begin(), l.end(), [](int v) { return v == 0; });
    if (lz && j == 0) throw std::invalid_argument("first_melnikov_ok: (l, j) must be nonzero");
    double lhs = std::abs(dot(omega, l) + j * c);
    return lhs > 4.0 * std::pow(dio.gamma, dio.upsilon) * bracket_j(j) / std::pow(bracket(l), dio.tau1);
}

bool second_melnikov_ok(const std::vector<double>& omega, const std::map<int, double>& mu,
                        const std::vector<int>& l, int j, int j0, const DiophantineParams& dio) {
    bool lz = std::all_of(l.begin(), l.end(), [](int v) { return v == 0; });
    if (lz && j == j0) throw std::invalid_argument("second_melnikov_ok: (l, j) must differ from (0, j0)");
    auto a = mu.find(j), b = mu.find(j0);
    if (a == mu.end() || b == mu.end()) throw std::invalid_argument("second_melnikov_ok: mode not in spectrum");
    double lhs = std::abs(dot(omega, l) + a->second - b->second);
    return lhs > 2.0 * dio.gamma * bracket_j(j - j0) / std::pow(bracket(l), dio.tau2);
}

bool diophantine_ok(const std::vector<double>& omega, const std::vector<int>& l, const DiophantineParams& dio) {
    return std::abs(dot(omega, l)) > dio.gamma / std::pow(bracket(l), dio.tau1);
}

namespace {

double bisect(const std::function<double(double)>& h, double u, double v, double hu, double tol) {
    for (int it = 0; it < 200 && v - u > tol; ++it) {
        double m = 0.5 * (u + v);
        double hm = h(m);
        if ((hm < 0.0) == (hu < 0.0)) {
            u = m;
            hu = hm;
        } else {
            v = m;
        }
    }
    return 0.5 * (u + v);
}

}  // namespace

std::vector<Interval> merge(std::vector<Interval> iv) {
    std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (const auto& x : iv) {
        if (!out.empty() && x.lo <= out.back().hi) out.back().hi = std::max(out.back().hi, x.hi);
        else out.push_back(x);
    }
    return out;
}

double measure(const std::vector<Interval>& iv) {
    double s = 0.0;
    for (const auto& x : merge(iv)) s += x.hi - x.lo;
    return s;
}

std::vector<Interval> sublevel_set(const std::function<double(double)>& f, const std::vector<double>& fx, double a,
                                   double b, double alpha, double tol) {
    int n = int(fx.size());
    if (n < 2 || !(b > a)) throw std::invalid_argument("sublevel_set: need n >= 2 and b > a");
    if (!(alpha >= 0.0)) throw std::invalid_argument("sublevel_set: alpha must be nonnegative");
    double h = (b - a) / (n - 1);
    std::vector<Interval> out;
    auto in = [&](double v) { return std::abs(v) <= alpha; };
    for (int i = 0; i + 1 < n; ++i) {
        double x0 = a + i * h, x1 = (i + 1 == n - 1) ? b : a + (i + 1) * h;
        double f0 = fx[i], f1 = fx[i + 1];
        std::vector<double> pts{x0, x1};
        for (double lev : {alpha, -alpha}) {
            double g0 = f0 - lev, g1 = f1 - lev;
            if ((g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0))
                pts.push_back(bisect([&](double x) { return f(x) - lev; }, x0, x1, g0, tol));
        }
        if (pts.size() == 2) {
            if (in(f0) && in(f1)) out.push_back({x0, x1});
            continue;
        }
        std::sort(pts.begin(), pts.end());
        for (size_t k = 0; k + 1 < pts.size(); ++k) {
            double u = pts[k], v = pts[k + 1];
            if (v <= u) continue;
            if (in(f(0.5 * (u + v)))) out.push_back({u, v});
        }
    }
    return merge(out);
}

std::vector<Interval> sublevel_set(const std::function<double(double)>& f, double a, double b, int n, double alpha,
                                   double tol) {
    std::vector<double> fx(n);
    for (int i = 0; i < n; ++i) fx[i] = f(i + 1 == n ? b : a + i * (b - a) / (n - 1));
    return sublevel_set(f, fx, a, b, alpha, tol);
}

namespace {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < x.size(); ++i)
        if (y[i] > 0.0 && x[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= lx.size();
    my /= ly.size();
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

MeasureReport resonant_complement_measure(const spectrum::SpectrumContext& base, double lambda_lo, double lambda_hi,
                                          int grid, const std::vector<double>& gammas, double tau1, int lmax) {
    base.validate();
    if (!(lambda_lo > 0.0 && lambda_hi > lambda_lo)) throw std::invalid_argument("bad lambda range");
    if (grid < 10000) throw std::invalid_argument("lambda grid must have at least 1e4 points");
    if (lmax < 5) throw std::invalid_argument("lmax must be >= 5");
    for (double g : gammas)
        if (!(g > 0.0)) throw std::invalid_argument("gamma values must be positive");

    const int d = int(base.sites.size());
    MeasureReport rep;
    rep.gamma_values = gammas;
    rep.grid_resolution = grid;
    rep.lambda_lo = lambda_lo;
    rep.lambda_hi = lambda_hi;
    rep.lmax = lmax;

    std::vector<std::vector<double>> w(grid);
    double h = (lambda_hi - lambda_lo) / (grid - 1);
    for (int i = 0; i < grid; ++i)
        w[i] = spectrum::frequency_vector(base.with_lambda(i + 1 == grid ? lambda_hi : lambda_lo + i * h));

    auto ls = spectrum::enumerate_l(d, lmax, true);
    for (double gam : gammas) {
        std::vector<Interval> all;
        std::vector<std::vector<int>> hit;
        double sum = 0.0;
        for (const auto& l : ls) {
            double thr = gam / std::pow(bracket(l), tau1);
            std::vector<double> fx(grid);
            for (int i = 0; i < grid; ++i) fx[i] = dot(w[i], l);
            auto f = [&](double lam) { return dot(spectrum::frequency_vector(base.with_lambda(lam)), l); };
            auto iv = sublevel_set(f, fx, lambda_lo, lambda_hi, thr, 1e-10 * h);
            if (!iv.empty()) {
                hit.push_back(l);
                sum += measure(iv);
                all.insert(all.end(), iv.begin(), iv.end());
            }
        }
        auto merged = merge(all);
        rep.complement_measure.push_back(measure(merged));
        rep.sum_of_measures.push_back(sum);
        rep.intervals.push_back(merged);
        rep.resonant_l.push_back(hit);
    }
    rep.fitted_exponent = loglog_slope(rep.gamma_values, rep.complement_measure);
    return rep;
}

RussmannResult russmann_check(const std::vector<std::function<double(double)>>& derivs, double a, double b, int n,
                              const std::vector<double>& alphas, double beta) {
    if (derivs.empty()) throw std::invalid_argument("russmann_check: need f and its derivatives");
    if (alphas.empty()) throw std::invalid_argument("russmann_check: need at least one alpha");
    if (!(beta > 0.0)) throw std::invalid_argument("russmann_check: beta must be positive");
    const int q0 = std::max(1, int(derivs.size()) - 1);
    RussmannResult res;
    res.alphas = alphas;
    std::vector<double> fx(n);
    res.min_max_derivative = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double x = i + 1 == n ? b : a + i * (b - a) / (n - 1);
        fx[i] = derivs[0](x);
        double mx = 0.0;
        for (const auto& d : derivs) mx = std::max(mx, std::abs(d(x)));
        res.min_max_derivative = std::min(res.min_max_derivative, mx);
    }
    res.hypothesis_ok = res.min_max_derivative >= beta;
    for (double al : alphas) res.measures.push_back(measure(sublevel_set(derivs[0], fx, a, b, al)));

    // C from the largest alpha, then every alpha must sit under 3 C alpha^{1/q0} / beta^{1+1/q0}
    size_t imax = std::max_element(alphas.begin(), alphas.end()) - alphas.begin();
    double e = 1.0 / q0, bb = std::pow(beta, 1.0 + e);
    res.fitted_C = res.measures[imax] * bb / std::pow(alphas[imax], e);
    res.bound_ok = res.hypothesis_ok;
    for (size_t k = 0; k < alphas.size(); ++k)
        if (res.measures[k] > 3.0 * res.fitted_C * std::pow(alphas[k], e) / bb * (1.0 + 1e-12)) res.bound_ok = false;
    res.fitted_exponent = loglog_slope(alphas, res.measures);
    return res;
}

}  // namespace qgvp::cantor
