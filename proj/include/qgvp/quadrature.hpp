#pragma once

#include <functional>
#include <vector>

namespace qgvp::quad {

struct Rule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

// Gauss-Legendre rule with n nodes, cached.
const Rule& gauss_legendre(int n);

// int_a^b f with an n-point Gauss-Legendre rule.
double integrate(const std::function<double(double)>& f, double a, double b, int n);

// Sum of a slowly convergent (typically alternating) series via Levin's u transform.
double accelerate(const std::vector<double>& terms);

}  // namespace qgvp::quad
