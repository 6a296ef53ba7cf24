#include <cstdio>

#include "gperm/analytic.hpp"
#include "gperm/configuration.hpp"

// Density as a function of fugacity, the critical density, and the loop/interlacement split above it.
int main() {
    gperm::ModelParams p;
    const double rc = gperm::critical_density(p.alpha, p.d);
    std::printf("d = %d, alpha = %.6f, rho_c = %.10f\n\n", p.d, p.alpha, rc);

    std::printf("%8s %14s %12s\n", "lambda", "rho(lambda)", "rho_1/rho");
    for (double l : {0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0}) {
        p.lambda = l;
        const double rho = gperm::total_density(p).value;
        std::printf("%8.2f %14.10f %12.6f\n", l, rho, gperm::loop_density(1, p) / rho);
    }

    std::printf("\n%8s %10s %10s %10s\n", "rho", "lambda", "beta", "beta/rho");
    for (double rho : {0.5, 1.0, 2.0, 2.5, 3.0, 4.0, 6.0}) {
        const auto ph = gperm::grp_phase(rho, p);
        std::printf("%8.2f %10.6f %10.6f %10.6f\n", rho, ph.lambda, ph.beta, ph.beta / rho);
    }
    return 0;
}
