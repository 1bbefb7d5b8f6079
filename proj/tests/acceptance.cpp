#include "qgvp/checks.hpp"

#include <cstdio>

int main() {
    int failed = 0;
    for (const auto& c : qgvp::checks::acceptance_suite(0)) {
        auto r = qgvp::checks::run_check(c);
        if (!r.pass) ++failed;
        std::printf("%s criterion %s (%s): %s [%.2fs]\n", r.pass ? "PASS" : "FAIL", r.id.c_str(), r.name.c_str(),
                    r.detail.c_str(), r.seconds);
        std::fflush(stdout);
    }
    std::printf("%d of 15 criteria failed\n", failed);
    return failed ? 1 : 0;
}
