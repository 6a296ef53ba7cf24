#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "gperm/loopsoup.hpp"
#include "gperm/numerics.hpp"

using namespace gperm;

namespace {

ModelParams make(int d, double lambda) {
    ModelParams p;
    p.d = d;
    p.alpha = std::numbers::pi;
    p.lambda = lambda;
    return p;
}

double points_in(const LoopSoupSample& s, const Box& W) {
    double n = 0;
    for (const auto& l : s.loops) n += static_cast<double>(visits_in(l, W));
    return n;
}

}  // namespace

TEST_CASE("canonical rotation", "[loopsoup]") {
    RngStream rng(1, 1);
    for (int t = 0; t < 50; ++t) {
        const auto body = sample_bridge(rng, Point{rng.uniform(), rng.uniform()}, 1 + t % 9, 1.0);
        const Loop loop(body);
        const Loop again(loop.points);
        CHECK(again == loop);
        for (std::size_t j = 0; j < loop.length(); ++j) {
            Loop r = rotate_loop(loop, j);
            r.canonicalize();
            CHECK(r == loop);
        }
        for (std::size_t j = 1; j < loop.length(); ++j) CHECK(detail::compare_points(loop.points[0], loop.points[j]) <= 0);
    }
    // tie on the minimal point resolved by the following points
    Loop tie(PointList(1, {0.0, 2.0, 0.0, 1.0}));
    CHECK(tie.points.coords == std::vector<double>{0.0, 1.0, 0.0, 2.0});
}

TEST_CASE("default k_max truncation", "[loopsoup]") {
    const auto p = make(3, 0.5);
    const auto c = default_k_max(p);
    const double rho = total_density(p).value;
    CHECK(c.tail_bound < 1e-4 * rho);
    CHECK_FALSE(c.capped);
    double tail = 0.0;
    for (int k = static_cast<int>(c.k_max) + 1; k < 200; ++k) tail += loop_density(k, p);
    CHECK(tail <= c.tail_bound);
    // one shorter would violate the criterion
    const auto crit = default_k_max(make(3, 1.0));
    CHECK(crit.capped);
    CHECK(crit.k_max == (std::int64_t{1} << 20));
    const auto plan = plan_loop_lengths(make(3, 1.0), 1.0, crit.k_max);
    CHECK(plan.tail_density == Approx(2.0 / std::sqrt(static_cast<double>(crit.k_max))).epsilon(1e-3));
}

TEST_CASE("single-point loops form a Poisson process of the right rate", "[loopsoup]") {
    const auto p = make(2, 0.4);
    const Box A = Box::cube(2, 0.0, 3.0);
    std::vector<double> counts;
    for (int r = 0; r < 2000; ++r) {
        RngStream rng(5, static_cast<std::uint64_t>(r));
        const auto s = sample_loops_hitting(rng, A, p, 1);
        for (const auto& l : s.loops) CHECK(l.length() == 1);
        counts.push_back(static_cast<double>(s.loops.size()));
    }
    const auto m = mean_and_stderr(counts);
    const double expect = 0.4 * A.volume();
    CHECK(std::abs(m.mean - expect) < 3 * m.stderr_);
    CHECK(m.sd * m.sd == Approx(expect).epsilon(0.1));
}

TEST_CASE("vanishing fugacity gives empty samples", "[loopsoup]") {
    const auto p = make(3, 1e-9);
    RngStream rng(2, 2);
    int empty = 0;
    for (int r = 0; r < 100; ++r) empty += sample_loops_hitting(rng, Box::cube(3, 0.0, 1.0), p, 10).loops.empty() ? 1 : 0;
    CHECK(empty == 100);
}

TEST_CASE("hitting sample invariants and density", "[loopsoup]") {
    const auto p = make(3, 0.5);
    const Box A = Box::cube(3, 0.0, 2.0);
    const auto kc = default_k_max(p);
    const auto plan = plan_loop_lengths(p, A.volume(), kc.k_max);
    std::vector<double> dens;
    for (int r = 0; r < 300; ++r) {
        RngStream rng(11, static_cast<std::uint64_t>(r));
        const auto s = sample_loops_hitting(rng, A, plan);
        CHECK(s.k_max == kc.k_max);
        for (const auto& l : s.loops) {
            const auto nA = visits_in(l, A);
            CHECK(nA >= 1);
            CHECK(static_cast<std::int64_t>(l.length()) <= s.k_max);
        }
        const auto inside = filter_contained(s, A);
        for (const auto& l : inside.loops) CHECK(visits_in(l, A) == static_cast<std::int64_t>(l.length()));
        dens.push_back(points_in(s, A) / A.volume());
    }
    const auto m = mean_and_stderr(dens);
    const double target = total_density(p).value - plan.tail_density;
    CHECK(std::abs(m.mean - target) < 3 * m.stderr_);
}

TEST_CASE("filter_contained", "[loopsoup]") {
    LoopSoupSample s;
    s.window = Box::cube(1, 0.0, 1.0);
    s.loops.emplace_back(PointList(1, {0.2, 0.5}));
    s.loops.emplace_back(PointList(1, {0.2, 1.5}));
    const auto f = filter_contained(s, s.window);
    REQUIRE(f.loops.size() == 1);
    CHECK(f.loops[0] == s.loops[0]);
    LoopSoupSample all = s;
    all.loops.pop_back();
    CHECK(filter_contained(all, all.window).loops == all.loops);
}

TEST_CASE("cycle spectrum", "[loopsoup]") {
    CHECK(cycle_spectrum(std::vector<Loop>{}).empty());
    const auto p = make(1, 0.5);
    const Box A = Box::cube(1, 0.0, 20.0);
    std::vector<std::vector<double>> per_k(5);
    for (int r = 0; r < 400; ++r) {
        RngStream rng(13, static_cast<std::uint64_t>(r));
        const auto s = sample_loops_hitting(rng, A, p, 40);
        const auto spec = cycle_spectrum(s);
        for (const auto& [k, c] : spec) CHECK(c.points == k * c.loops);
        // points of k-loops inside A estimate ρ_k|A|
        std::vector<double> pts(5, 0.0);
        for (const auto& l : s.loops)
            if (l.length() <= 4) pts[l.length()] += static_cast<double>(visits_in(l, A));
        for (int k = 1; k <= 4; ++k) per_k[static_cast<std::size_t>(k)].push_back(pts[static_cast<std::size_t>(k)]);
    }
    for (int k = 1; k <= 4; ++k) {
        const auto m = mean_and_stderr(per_k[static_cast<std::size_t>(k)]);
        CHECK(std::abs(m.mean - loop_density(k, p) * A.volume()) < 3.5 * m.stderr_);
    }
    CHECK(loop_density(1, p) / loop_density(2, p) == Approx(std::sqrt(2.0) / 0.5).epsilon(1e-14));
}

TEST_CASE("one-loop counts in disjoint boxes are uncorrelated", "[loopsoup]") {
    const auto p = make(2, 0.6);
    const Box A = Box::cube(2, 0.0, 2.0);
    const Box left({0.0, 0.0}, {1.0, 2.0}), right({1.0, 0.0}, {2.0, 2.0});
    std::vector<double> prod, a, b;
    for (int r = 0; r < 4000; ++r) {
        RngStream rng(17, static_cast<std::uint64_t>(r));
        const auto s = sample_loops_hitting(rng, A, p, 30);
        double na = 0, nb = 0;
        for (const auto& l : s.loops) {
            if (l.length() != 1) continue;
            na += left.contains(l.points[0]) ? 1 : 0;
            nb += right.contains(l.points[0]) ? 1 : 0;
        }
        a.push_back(na);
        b.push_back(nb);
    }
    const auto ma = mean_and_stderr(a), mb = mean_and_stderr(b);
    for (std::size_t i = 0; i < a.size(); ++i) prod.push_back((a[i] - ma.mean) * (b[i] - mb.mean));
    const auto cov = mean_and_stderr(prod);
    CHECK(std::abs(cov.mean) < 3 * cov.stderr_);
}
