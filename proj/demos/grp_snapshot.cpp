#include <cstdio>
#include <map>

#include "gperm/configuration.hpp"

// Draws one configuration on either side of the transition and summarizes its cycle structure.
int main() {
    const auto A = gperm::Box::cube(3, 0.0, 2.0);
    const gperm::ModelParams p;
    for (double rho : {1.5, 4.0}) {
        const auto c = gperm::assemble_grp(gperm::RngStream(2024, 0), A, rho, p);
        std::map<std::size_t, std::size_t> lengths;
        std::size_t loop_points = 0;
        for (const auto& l : c.loops) {
            ++lengths[l.length()];
            loop_points += l.length();
        }
        std::size_t trajectory_points = 0;
        for (const auto& t : c.trajectories) trajectory_points += t.points.size();

        std::printf("rho = %.2f  lambda = %.6f  beta = %.6f  volume = %.1f\n", rho, c.params.lambda, c.beta, A.volume());
        std::printf("  points in window: %lld (expected %.1f)\n", static_cast<long long>(gperm::points_in(c, A)), rho * A.volume());
        std::printf("  loops: %zu carrying %zu points, trajectories: %zu carrying %zu points\n", c.loops.size(), loop_points,
                    c.trajectories.size(), trajectory_points);
        std::printf("  loop lengths:");
        for (const auto& [k, n] : lengths) std::printf(" %zu:%zu", k, n);
        std::printf("\n  k_max = %lld, loop tail density <= %.2g, return bound <= %.2g\n\n", static_cast<long long>(c.provenance.k_max),
                    c.provenance.loop_tail_density, c.provenance.return_bound);
    }
    return 0;
}
