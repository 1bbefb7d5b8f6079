#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace qgvp::checks {

struct CheckResult {
    std::string id;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct Check {
    std::string id;
    std::string name;
    std::function<CheckResult()> run;
};

// The fifteen acceptance criteria at their pinned tolerances.
std::vector<Check> acceptance_suite(std::uint64_t seed = 0);
// Fast invariant suite used by the CLI selftest.
std::vector<Check> selftest_suite(std::uint64_t seed = 0);

CheckResult run_check(const Check& c);

// Weak gradient identity: returns max over test curves of |<d_theta grad E, h> - c <F, h>| / |c <F, h>|.
double gradient_identity_error(double lambda, double c, int n_tests, double fd_step, int M, std::uint64_t seed);
// Minimum observed order over directions of the central-difference linearization check.
struct LinearizationCheck {
    std::vector<double> eps;
    std::vector<std::vector<double>> errors;  // per direction, per eps
    double min_order = 0.0;
    double max_rel_error = 0.0;
};
LinearizationCheck linearization_check(double lambda, int M, int n_dirs, const std::vector<double>& eps,
                                       std::uint64_t seed);

}  // namespace qgvp::checks
