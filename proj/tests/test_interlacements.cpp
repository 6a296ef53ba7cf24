#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "gperm/interlacements.hpp"

using namespace gperm;

namespace {

ModelParams three_d() {
    ModelParams p;
    p.d = 3;
    p.alpha = std::numbers::pi;
    p.lambda = 1.0;
    return p;
}

}  // namespace

TEST_CASE("trajectory structure", "[interlacements]") {
    const auto p = three_d();
    const Box A = Box::cube(3, 0.0, 2.0);
    const double R = escape_radius_for(A, 1e-3);
    WalkOptions opt;
    opt.max_gap_fill = 4;
    std::size_t with_excursions = 0, total = 0;
    for (int r = 0; r < 40; ++r) {
        RngStream rng(3, static_cast<std::uint64_t>(r));
        const auto s = sample_interlacements(rng, A, 1.0, p, R, opt);
        CHECK(s.trajectories.size() <= s.candidates);
        for (const auto& t : s.trajectories) {
            ++total;
            REQUIRE_FALSE(t.truncated());
            const auto n = t.points.size();
            REQUIRE(n >= 3);
            CHECK(A.contains(t.points[t.anchor_index]));
            CHECK(t.visits >= 1);
            CHECK(t.visits == visits_in(t, A));
            CHECK_FALSE(A.contains(t.points[t.s_index()]));
            CHECK_FALSE(A.contains(t.points[t.t_index()]));
            CHECK(A.contains(t.points[t.s_index() + 1]));
            CHECK(A.contains(t.points[t.t_index() - 1]));
            with_excursions += t.excursions.empty() ? 0 : 1;
            for (const auto& [i, steps] : t.excursions) {
                REQUIRE(i + 1 < n);
                CHECK(steps > opt.max_gap_fill);
                CHECK_FALSE(A.contains(t.points[i]));
                CHECK_FALSE(A.contains(t.points[i + 1]));
            }
            for (std::size_t e = 1; e < t.excursions.size(); ++e) CHECK(t.excursions[e - 1].first < t.excursions[e].first);
        }
    }
    CHECK(total > 20);
    CHECK(with_excursions > 0);
}

TEST_CASE("interlacement point density equals the level", "[interlacements]") {
    const auto p = three_d();
    const Box A = Box::cube(3, 0.0, 2.0);
    const double R = escape_radius_for(A, 1e-3);
    std::vector<double> dens, nA_over_beta;
    for (int r = 0; r < 300; ++r) {
        RngStream rng(19, static_cast<std::uint64_t>(r));
        const auto s = sample_interlacements(rng, A, 0.5, p, R);
        double pts = 0, sum_nA = 0;
        for (const auto& t : s.trajectories) {
            pts += static_cast<double>(visits_in(t, A));
            sum_nA += static_cast<double>(t.visits);
        }
        dens.push_back(pts / A.volume());
        nA_over_beta.push_back(sum_nA / 0.5);
    }
    const auto m = mean_and_stderr(dens);
    CHECK(std::abs(m.mean - 0.5) < 3 * m.stderr_);
    const auto q = mean_and_stderr(nA_over_beta);
    CHECK(std::abs(q.mean - A.volume()) < 3 * q.stderr_);
}

TEST_CASE("vanishing level and recurrent dimensions", "[interlacements]") {
    const auto p = three_d();
    const Box A = Box::cube(3, 0.0, 1.0);
    RngStream rng(1, 1);
    int empty = 0;
    for (int r = 0; r < 100; ++r) empty += sample_interlacements(rng, A, 1e-9, p, 100.0).trajectories.empty() ? 1 : 0;
    CHECK(empty == 100);
    ModelParams p2 = p;
    p2.d = 2;
    CHECK_THROWS_AS(sample_interlacements(rng, Box::cube(2, 0.0, 1.0), 1.0, p2, 100.0), TransienceError);
    CHECK_THROWS_AS(sample_interlacements(rng, A, 0.0, p, 100.0), ParameterError);
    CHECK_THROWS_AS(estimate_capacity(rng, Box::cube(2, 0.0, 1.0), p2, 10, 100.0), TransienceError);
}

TEST_CASE("same stream reproduces the sample", "[interlacements]") {
    const auto p = three_d();
    const Box A = Box::cube(3, 0.0, 1.0);
    RngStream a(77, 5), b(77, 5);
    const auto sa = sample_interlacements(a, A, 2.0, p, 500.0);
    const auto sb = sample_interlacements(b, A, 2.0, p, 500.0);
    CHECK(sa.trajectories == sb.trajectories);
    CHECK(sa.candidates == sb.candidates);
}

TEST_CASE("capacity is monotone under inclusion", "[interlacements]") {
    const auto p = three_d();
    const Box small = Box::cube(3, 0.0, 1.0), big = Box::cube(3, 0.0, 2.0);
    RngStream rng(23, 0);
    const auto cs = estimate_capacity(rng, small, p, 2000, escape_radius_for(small, 1e-3));
    const auto cb = estimate_capacity(rng, big, p, 2000, escape_radius_for(big, 1e-3));
    CHECK(cs.mean > 0.0);
    CHECK(cs.mean <= small.volume());
    CHECK(cb.mean - cs.mean > 3 * std::hypot(cs.stderr_, cb.stderr_));
}

TEST_CASE("last-exit decomposition of the unit cube", "[interlacements]") {
    const auto p = three_d();
    const Box A = Box::cube(3, 0.0, 1.0);
    const double R = escape_radius_for(A, 1e-3);
    for (const Point& y : {Point{0.5, 0.5, 0.5}, Point{0.05, 0.9, 0.3}}) {
        RngStream rng(29, static_cast<std::uint64_t>(y[1] * 100));
        const auto m = equilibrium_identity(rng, A, y, p, 10000, R);
        CHECK(std::abs(m.mean - 1.0) < 3 * m.stderr_);
        CHECK(m.stderr_ < 0.03);
    }
}
