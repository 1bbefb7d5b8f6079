#include "qgvp/spectrum.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace qgvp::spectrum {

void SpectrumContext::validate() const {
    if (!(lambda > lambda_min && lambda < lambda_max) || !std::isfinite(lambda))
        throw std::invalid_argument("SpectrumContext: lambda outside (lambda_min, lambda_max)");
    if (!(lambda_min >= 0.0 && lambda_min < lambda_max))
        throw std::invalid_argument("SpectrumContext: need 0 <= lambda_min < lambda_max");
    if (!(Omega > 0.0) || !std::isfinite(Omega))
        throw std::invalid_argument("SpectrumContext: Omega must be positive");
    if (sites.empty()) throw std::invalid_argument("SpectrumContext: sites must be nonempty");
    for (size_t k = 0; k < sites.size(); ++k) {
        if (sites[k] <= 0) throw std::invalid_argument("SpectrumContext: sites must be positive");
        if (k > 0 && sites[k] <= sites[k - 1])
            throw std::invalid_argument("SpectrumContext: sites must be strictly increasing");
    }
    policy.validate();
}

SpectrumContext SpectrumContext::with_lambda(double l) const {
    SpectrumContext c = *this;
    c.lambda = l;
    return c;
}

double omega_j(const SpectrumContext& ctx, int j) {
    if (j == 0) return 0.0;
    int a = std::abs(j);
    double p1 = bessel::product_IK(1, ctx.lambda, ctx.policy);
    double pj = a == 1 ? p1 : bessel::product_IK(a, ctx.lambda, ctx.policy);
    double w = a * (ctx.Omega + p1 - pj);
    return j < 0 ? -w : w;
}

double v0(const SpectrumContext& ctx) {
    return ctx.Omega + bessel::product_IK(1, ctx.lambda, ctx.policy);
}

std::vector<double> frequency_vector(const SpectrumContext& ctx) {
    std::vector<double> w;
    w.reserve(ctx.sites.size());
    for (int j : ctx.sites) w.push_back(omega_j(ctx, j));
    return w;
}

double ik_deriv(int j, double lambda, int q, const bessel::Policy& p) {
    j = std::abs(j);
    if (q == 0) return bessel::product_IK(j, lambda, p);
    if (2 * j > q && q <= 6) return bessel::product_IK_deriv(j, lambda, q, p);
    return bessel::product_IK_deriv_leibniz(j, lambda, q, p);
}

double omega_j_deriv(const SpectrumContext& ctx, int j, int q) {
    if (q == 0) return omega_j(ctx, j);
    if (j == 0) return 0.0;
    int a = std::abs(j);
    double w = a * (ik_deriv(1, ctx.lambda, q, ctx.policy) - ik_deriv(a, ctx.lambda, q, ctx.policy));
    return j < 0 ? -w : w;
}

std::vector<AsymRow> asymptotic_residual(const SpectrumContext& ctx, int jlo, int jhi) {
    if (jlo < 1 || jhi < jlo) throw std::invalid_argument("asymptotic_residual: bad j range");
    std::vector<AsymRow> rows;
    double l2 = ctx.lambda * ctx.lambda;
    for (int j = jlo; j <= jhi; ++j) {
        double jj = j;
        // Omega_j - V0 j = -j I_j K_j exactly; subtract before forming the O(j) terms
        double res = -jj * bessel::product_IK(j, ctx.lambda, ctx.policy) + 0.5 - l2 / (4.0 * jj * jj);
        rows.push_back({j, omega_j(ctx, j), res, res * jj * jj * jj * jj});
    }
    return rows;
}

double Q_poly(int m, double X) {
    double q = 1.0;
    for (int l = 2; l <= m; ++l) q *= X - double((2 * l - 1) * (2 * l - 1));
    return q;
}

double nondegeneracy_det(const std::vector<int>& sites) {
    double d = 1.0;
    for (size_t k = 0; k < sites.size(); ++k)
        for (size_t l = k + 1; l < sites.size(); ++l)
            d *= 4.0 * sites[l] * sites[l] - 4.0 * sites[k] * sites[k];
    return d;
}

double nondegeneracy_det_bruteforce(const std::vector<int>& sites) {
    int d = int(sites.size());
    if (d == 0) return 1.0;
    Eigen::MatrixXd B(d, d);
    for (int m = 0; m < d; ++m)
        for (int k = 0; k < d; ++k) B(m, k) = Q_poly(m + 1, 4.0 * sites[k] * sites[k]);
    // row scaling keeps the LU well conditioned; undo it on the determinant
    double scale = 1.0;
    for (int m = 0; m < d; ++m) {
        double s = B.row(m).cwiseAbs().maxCoeff();
        if (s == 0.0) return 0.0;
        B.row(m) /= s;
        scale *= s;
    }
    return Eigen::FullPivLU<Eigen::MatrixXd>(B).determinant() * scale;
}

std::string mode_name(TransversalityMode m) {
    switch (m) {
        case TransversalityMode::PureFrequency: return "pure-frequency";
        case TransversalityMode::PlusI1K1: return "plus-I1K1";
        case TransversalityMode::PlusOmegaJ: return "plus-Omega_j";
        case TransversalityMode::Difference: return "difference";
    }
    return "?";
}

double bracket(const std::vector<int>& l) {
    int s = 0;
    for (int v : l) s += std::abs(v);
    return std::max(1, s);
}

std::vector<std::vector<int>> enumerate_l(int d, int lmax, bool half) {
    std::vector<std::vector<int>> out;
    std::vector<int> l(d, -lmax);
    std::function<void(int, int)> rec = [&](int k, int budget) {
        if (k == d) {
            int n1 = 0, lead = 0;
            for (int v : l) {
                n1 += std::abs(v);
                if (lead == 0) lead = v;
            }
            if (n1 == 0) return;
            if (half && lead < 0) return;
            out.push_back(l);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            l[k] = v;
            rec(k + 1, budget - std::abs(v));
        }
    };
    rec(0, lmax);
    return out;
}

namespace {

bool is_site(const std::vector<int>& sites, int j) {
    return std::find(sites.begin(), sites.end(), j) != sites.end();
}

}  // namespace

TransversalityScan transversality_scan(const SpectrumContext& ctx, const std::vector<double>& lambdas,
                                       int lmax, int jmax, int q0, double fd_step) {
    ctx.validate();
    if (lambdas.empty()) throw std::invalid_argument("transversality_scan: empty lambda grid");
    if (q0 < 0 || q0 > 4) throw std::invalid_argument("transversality_scan: q0 must be in [0, 4]");
    if (lmax < 0 || jmax < 1) throw std::invalid_argument("transversality_scan: bad ranges");
    if (!(fd_step > 0.0)) throw std::invalid_argument("transversality_scan: fd_step must be positive");

    const int d = int(ctx.sites.size());
    const int jtop = std::max(jmax, ctx.sites.back());
    const int nl = int(lambdas.size());

    // Om[i][j][k] = d^k/dlambda^k Omega_j at lambdas[i];  P1[i][k] for I_1 K_1
    std::vector<std::vector<std::vector<double>>> Om(nl, std::vector<std::vector<double>>(jtop + 1, std::vector<double>(q0 + 1)));
    std::vector<std::vector<double>> P1(nl, std::vector<double>(q0 + 1));
    TransversalityScan scan;
    scan.lambda_points = nl;
    for (int i = 0; i < nl; ++i) {
        SpectrumContext c = ctx.with_lambda(lambdas[i]);
        for (int k = 0; k <= q0; ++k) {
            P1[i][k] = ik_deriv(1, lambdas[i], k, ctx.policy);
            for (int j = 0; j <= jtop; ++j) Om[i][j][k] = omega_j_deriv(c, j, k);
        }
        // cross-check the analytic derivatives against central differences
        for (int k = 1; k <= q0; ++k) {
            for (int j = 1; j <= jtop; ++j) {
                double h = fd_step;
                double fp = omega_j_deriv(ctx.with_lambda(lambdas[i] + h), j, k - 1);
                double fm = omega_j_deriv(ctx.with_lambda(lambdas[i] - h), j, k - 1);
                double fd = (fp - fm) / (2.0 * h);
                double scale = std::max(1.0, std::abs(Om[i][j][k]));
                scan.fd_max_discrepancy = std::max(scan.fd_max_discrepancy, std::abs(fd - Om[i][j][k]) / scale);
            }
        }
    }

    auto ls = enumerate_l(d, lmax, false);
    std::vector<int> zero(d, 0);

    for (int c = 0; c < 4; ++c) {
        auto& rep = scan.cases[c];
        rep.mode = TransversalityMode(c);
        rep.q0_used = q0;
        rep.rho0_estimate = std::numeric_limits<double>::infinity();
    }

    // min over lambda of max_k |E^(k)| / <l> for one tuple
    auto consider = [&](int c, const std::vector<int>& l, int j, int j0, int sign,
                        const std::function<double(int, int)>& expr) {
        auto& rep = scan.cases[c];
        double br = bracket(l);
        double worst = std::numeric_limits<double>::infinity();
        double wl = 0.0;
        for (int i = 0; i < nl; ++i) {
            double mx = 0.0;
            for (int k = 0; k <= q0; ++k) mx = std::max(mx, std::abs(expr(i, k)));
            mx /= br;
            if (mx < worst) {
                worst = mx;
                wl = lambdas[i];
            }
        }
        ++rep.n_tuples;
        if (worst < rep.rho0_estimate) {
            rep.rho0_estimate = worst;
            rep.worst_l = l;
            rep.worst_j = j;
            rep.worst_j0 = j0;
            rep.worst_sign = sign;
            rep.worst_lambda = wl;
        }
    };
    auto wl_dot = [&](int i, int k, const std::vector<int>& l) {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += l[a] * Om[i][ctx.sites[a]][k];
        return s;
    };

    // (i)
    for (const auto& l : enumerate_l(d, lmax, true))
        consider(0, l, 0, 0, 1, [&](int i, int k) { return wl_dot(i, k, l); });

    // (ii)
    std::vector<std::vector<int>> lall = ls;
    lall.insert(lall.begin(), zero);
    for (const auto& l : lall)
        for (int j = 0; j <= jmax; ++j)
            for (int sg = -1; sg <= 1; sg += 2) {
                if (j == 0 && l == zero) continue;
                if (j == 0 && sg < 0) continue;
                consider(1, l, j, 0, sg, [&](int i, int k) { return wl_dot(i, k, l) + sg * j * P1[i][k]; });
            }

    // (iii)
    for (const auto& l : lall)
        for (int j = 1; j <= jmax; ++j) {
            if (is_site(ctx.sites, j)) continue;
            for (int sg = -1; sg <= 1; sg += 2)
                consider(2, l, j, 0, sg, [&](int i, int k) { return wl_dot(i, k, l) + sg * Om[i][j][k]; });
        }

    // (iv)
    for (const auto& l : lall)
        for (int j = 1; j <= jmax; ++j) {
            if (is_site(ctx.sites, j)) continue;
            for (int j0 = 1; j0 <= jmax; ++j0) {
                if (is_site(ctx.sites, j0)) continue;
                for (int sg = -1; sg <= 1; sg += 2) {
                    if (sg < 0 && l == zero && j == j0) continue;
                    consider(3, l, j, j0, sg,
                             [&](int i, int k) { return wl_dot(i, k, l) + Om[i][j][k] + sg * Om[i][j0][k]; });
                }
            }
        }

    scan.rho0_estimate = std::numeric_limits<double>::infinity();
    for (auto& rep : scan.cases) {
        if (rep.n_tuples == 0) rep.rho0_estimate = 0.0;
        else scan.rho0_estimate = std::min(scan.rho0_estimate, rep.rho0_estimate);
    }
    for (auto& rep : scan.cases)
        if (rep.n_tuples > 0 && !(rep.rho0_estimate > 0.0))
            throw std::runtime_error("transversality_scan: non-positive estimate in case " + mode_name(rep.mode));
    return scan;
}

}  // namespace qgvp::spectrum
