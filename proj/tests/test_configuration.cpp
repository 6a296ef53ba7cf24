#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gperm/configuration.hpp"
#include "gperm/numerics.hpp"

using namespace gperm;

namespace {

ModelParams params_d(int d, double lambda = 0.5) {
    ModelParams p;
    p.d = d;
    p.alpha = std::numbers::pi;
    p.lambda = lambda;
    return p;
}

Configuration loops_only(int d, std::vector<PointList> loops) {
    Configuration c;
    c.params = params_d(d);
    c.window = Box::cube(d, 0.0, 1.0);
    for (auto& l : loops) c.loops.emplace_back(std::move(l));
    return c;
}

}  // namespace

TEST_CASE("phase selection", "[grp]") {
    const auto p3 = params_d(3);
    const double rc = critical_density(p3.alpha, 3);
    const auto super = grp_phase(3.0, p3);
    CHECK(super.lambda == 1.0);
    CHECK(super.beta == Approx(3.0 - rc).epsilon(1e-12));
    CHECK(super.beta == Approx(0.3876).margin(1e-4));
    const auto at = grp_phase(rc, p3);
    CHECK(at.lambda == 1.0);
    CHECK(at.beta == 0.0);
    const auto sub = grp_phase(1.0, p3);
    CHECK(sub.beta == 0.0);
    CHECK(sub.lambda < 1.0);
    for (double rho : {0.5, 5.0, 50.0}) {
        const auto one = grp_phase(rho, params_d(1));
        CHECK(one.beta == 0.0);
        CHECK(one.lambda < 1.0);
    }
    CHECK_THROWS_AS(grp_phase(-1.0, p3), ParameterError);
}

TEST_CASE("assembled configurations", "[grp]") {
    RngStream rng(41, 0);
    const auto c1 = assemble_grp(rng, Box::cube(1, 0.0, 5.0), 20.0, params_d(1));
    CHECK(c1.trajectories.empty());
    CHECK_FALSE(c1.loops.empty());
    const auto p3 = params_d(3);
    const auto at = assemble_grp(rng, Box::cube(3, 0.0, 1.0), critical_density(p3.alpha, 3), p3);
    CHECK(at.trajectories.empty());
    CHECK(at.params.lambda == 1.0);
    const auto c3 = assemble_grp(rng, Box::cube(3, 0.0, 2.0), 3.0, p3);
    CHECK(c3.beta > 0.38);
    CHECK(c3.provenance.loop_stream != c3.provenance.interlacement_stream);
    CHECK(c3.provenance.escape_radius > 0.0);
    CHECK(c3.provenance.return_bound <= 2e-4);
    const auto again = assemble_grp(RngStream(41, 0), Box::cube(3, 0.0, 2.0), 3.0, p3);
    CHECK(again == assemble_grp(RngStream(41, 0), Box::cube(3, 0.0, 2.0), 3.0, p3));
}

TEST_CASE("subcritical and supercritical densities", "[grp]") {
    const auto p3 = params_d(3);
    const Box A = Box::cube(3, 0.0, 2.0);
    for (double rho : {1.0, 3.0}) {
        std::vector<double> dens;
        double tail = 0.0;
        for (int r = 0; r < 150; ++r) {
            const auto c = assemble_grp(RngStream(43, static_cast<std::uint64_t>(r)), A, rho, p3);
            dens.push_back(static_cast<double>(points_in(c, A)) / A.volume());
            tail = c.provenance.loop_tail_density;
        }
        const auto m = mean_and_stderr(dens);
        CHECK(std::abs(m.mean - rho) < 3 * std::hypot(m.stderr_, tail));
    }
}

TEST_CASE("permutation of loops", "[grp]") {
    const auto c = loops_only(2, {PointList(2, {0.1, 0.1, 0.5, 0.5, 0.9, 0.2}), PointList(2, {0.3, 0.7})});
    const auto p = to_permutation(c);
    REQUIRE(p.size() == 4);
    std::size_t fixed = 0, three = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto s = static_cast<std::size_t>(p.succ[i]);
        if (s == i) ++fixed;
        if (static_cast<std::size_t>(p.succ[static_cast<std::size_t>(p.succ[s])]) == i && s != i) ++three;
        CHECK(static_cast<std::size_t>(p.pred[s]) == i);
    }
    CHECK(fixed == 1);
    CHECK(three == 3);
    const auto ct = cycle_type(p);
    CHECK(ct == std::map<std::int64_t, std::int64_t>{{1, 1}, {3, 1}});
    CHECK(to_configuration(p, c) == c);
    auto dup = c;
    dup.loops.emplace_back(PointList(2, {0.3, 0.7}));
    CHECK_THROWS_AS(to_permutation(dup), IntegrityError);
}

TEST_CASE("cycle type equals the cycle spectrum", "[grp]") {
    RngStream rng(47, 0);
    const auto c = assemble_grp(rng, Box::cube(2, 0.0, 3.0), 2.0, params_d(2));
    const auto ct = cycle_type(to_permutation(c));
    const auto spec = cycle_spectrum(c.loops);
    REQUIRE(ct.size() == spec.size());
    for (const auto& [k, cc] : spec) CHECK(ct.at(k) == cc.loops);
}

TEST_CASE("hamiltonian and weights", "[grp]") {
    const auto p = params_d(3, 0.7);
    const Loop one(PointList(3, {0.1, 0.2, 0.3}));
    const auto h1 = hamiltonian_and_weight(one, p);
    CHECK(h1.hamiltonian == 0.0);
    CHECK(h1.weight() == Approx(0.7 * p.prefactor()).epsilon(1e-13));
    const Loop two(PointList(3, {0.0, 0.0, 0.0, 0.3, 0.4, 0.0}));
    const auto h2 = hamiltonian_and_weight(two, p);
    CHECK(h2.hamiltonian == Approx(2 * 0.25).epsilon(1e-14));
    const Point a{0.0, 0.0, 0.0}, b{0.3, 0.4, 0.0};
    const double pab = gauss_pdf(a, b, p.step_variance());
    CHECK(h2.weight() == Approx(0.49 * pab * pab).epsilon(1e-13));
    CHECK(log_weight_of_loops({one, two}, p) == Approx(h1.log_weight + h2.log_weight).epsilon(1e-15));
    CHECK(std::exp(log_weight_of_loops({one, two}, p)) == Approx(h1.weight() * h2.weight()).epsilon(1e-13));
}

TEST_CASE("decomposition examples", "[grp]") {
    const Box A = Box::cube(1, 0.0, 1.0);
    const auto inside = to_permutation(loops_only(1, {PointList(1, {0.2, 0.4, 0.6})}));
    const auto d1 = decompose(inside, A);
    CHECK(d1.U.empty());
    CHECK(d1.V.empty());
    CHECK(d1.whole_inside.size() == 1);
    CHECK(d1.inside_paths.empty());
    const auto straddle = to_permutation(loops_only(1, {PointList(1, {0.5, 1.5})}));
    const auto d2 = decompose(straddle, A);
    REQUIRE(d2.U.size() == 1);
    REQUIRE(d2.V.size() == 1);
    CHECK(d2.U[0] == d2.V[0]);
    REQUIRE(d2.outside_paths.size() == 1);
    CHECK(d2.outside_paths[0].size() == 1);
    REQUIRE(d2.inside_paths.size() == 1);
    CHECK(d2.inside_paths[0].size() == 3);
    CHECK(recompose(d2, straddle) == straddle);
}

TEST_CASE("decomposition fuzz", "[grp]") {
    for (int r = 0; r < 2000; ++r) {
        RngStream rng(53, static_cast<std::uint64_t>(r));
        const int d = 1 + static_cast<int>(rng.below(3));
        const auto c = synthetic_configuration(rng, d);
        const auto p = to_permutation(c);
        CHECK(to_configuration(p, c) == c);
        const Box& A = c.window;
        const auto dec = decompose(p, A);
        CHECK(dec.U.size() == dec.V.size());
        auto owned = owned_points(dec);
        std::sort(owned.begin(), owned.end());
        std::vector<std::size_t> all(p.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        CHECK(owned == all);
        CHECK(dec.I_points.size() + dec.O_points.size() == p.size());
        CHECK(recompose(dec, p) == p);
        CHECK(stitch(inside_component(p, A), outside_component(p, A), p.size()) == p.succ);
        const auto w = boundary_weights(p, dec, c.params);
        CHECK(w.inside + w.outside == Approx(w.total).epsilon(1e-12).margin(1e-12));
        // moving outside-only points leaves the inside component unchanged
        auto moved = p;
        std::vector<char> near(p.size(), 0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!A.contains(p.points[i])) continue;
            near[i] = 1;
            if (p.succ[i] >= 0) near[static_cast<std::size_t>(p.succ[i])] = 1;
            if (p.pred[i] >= 0) near[static_cast<std::size_t>(p.pred[i])] = 1;
        }
        for (std::size_t i = 0; i < p.size(); ++i)
            if (!near[i]) moved.points.mut(i)[0] += 10.0;
        CHECK(inside_component(moved, A) == inside_component(p, A));
    }
}
