#include "qgvp/quadrature.hpp"

#include <gsl/gsl_integration.h>
#include <gsl/gsl_sum.h>

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace qgvp::quad {

const Rule& gauss_legendre(int n) {
    static std::map<int, std::unique_ptr<Rule>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;

    gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(n);
    if (!t) throw std::runtime_error("gauss_legendre: allocation failed");
    auto r = std::make_unique<Rule>();
    r->x.resize(n);
    r->w.resize(n);
    for (int i = 0; i < n; ++i)
        gsl_integration_glfixed_point(-1.0, 1.0, i, &r->x[i], &r->w[i], t);
    gsl_integration_glfixed_table_free(t);
    auto& ref = *r;
    cache[n] = std::move(r);
    return ref;
}

double integrate(const std::function<double(double)>& f, double a, double b, int n) {
    const Rule& r = gauss_legendre(n);
    double c = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
    for (int i = 0; i < n; ++i) s += r.w[i] * f(c + h * r.x[i]);
    return s * h;
}

double accelerate(const std::vector<double>& terms) {
    if (terms.empty()) return 0.0;
    if (terms.size() < 3) {
        double s = 0.0;
        for (double t : terms) s += t;
        return s;
    }
    gsl_sum_levin_u_workspace* w = gsl_sum_levin_u_alloc(terms.size());
    double sum = 0.0, err = 0.0;
    gsl_sum_levin_u_accel(terms.data(), terms.size(), w, &sum, &err);
    gsl_sum_levin_u_free(w);
    return sum;
}

}  // namespace qgvp::quad
