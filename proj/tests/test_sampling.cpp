#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gperm/analytic.hpp"
#include "gperm/numerics.hpp"
#include "gperm/rng.hpp"
#include "gperm/sampling.hpp"

using namespace gperm;

namespace {

double normal_cdf(double x, double sd) { return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0))); }

// Kolmogorov–Smirnov statistic of a sample against N(0, sd²).
double ks_statistic(std::vector<double> v, double sd) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double dmax = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = normal_cdf(v[i], sd);
        dmax = std::max({dmax, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    return dmax;
}

}  // namespace

TEST_CASE("philox matches reference block outputs", "[sampling]") {
    const auto b0 = Philox4x64::block({7, 11}, {0, 0, 0, 0});
    CHECK(b0[0] == 0x73972ebfebd13300ULL);
    CHECK(b0[1] == 0xc1f2c9ef6b5f5c9bULL);
    CHECK(b0[2] == 0xb9fdb4291fd06c09ULL);
    CHECK(b0[3] == 0x8e66b3da064456bfULL);
    Philox4x64 eng(7, 11);
    CHECK(eng() == 0x504a32d52e513602ULL);
    CHECK(eng() == 0x28ab66d5048f8dd8ULL);
}

TEST_CASE("streams replay and differ", "[sampling]") {
    RngStream a(42, 3), b(42, 3), c(42, 4), e(43, 3);
    bool differs_c = false, differs_e = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        CHECK(x == b.normal());
        differs_c |= x != c.normal();
        differs_e |= x != e.normal();
    }
    CHECK(differs_c);
    CHECK(differs_e);
    // independent streams: correlation near zero
    RngStream s1(1, stream_id({0, 1})), s2(1, stream_id({0, 2}));
    double sxy = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sxy += s1.normal() * s2.normal();
    CHECK(std::abs(sxy / n) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("gaussian increments", "[sampling]") {
    RngStream rng(9, 1);
    const int n = 1000000;
    const double alpha = std::numbers::pi;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n / 2; ++i) {
        const auto v = gaussian_increment(rng, alpha, 2);
        for (double x : v) {
            s += x;
            s2 += x * x;
        }
    }
    const double var = 1.0 / (2.0 * alpha);
    CHECK(std::abs(s / n) < 4.0 * std::sqrt(var) / 1000.0);
    CHECK(std::abs(s2 / n - var) < 4.0 * var * std::sqrt(2.0 / n));
    RngStream r1(5, 5), r2(5, 5);
    for (int i = 0; i < 10; ++i) CHECK(gaussian_increment(r1, 1.0, 3) == gaussian_increment(r2, 1.0, 3));
}

TEST_CASE("poisson counts", "[sampling]") {
    RngStream rng(3, 3);
    CHECK(poisson_count(rng, 0.0) == 0);
    CHECK_THROWS_AS(poisson_count(rng, -1.0), ParameterError);
    const int n = 1000000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += static_cast<double>(poisson_count(rng, 3.7));
    CHECK(std::abs(s / n - 3.7) < 4.0 * std::sqrt(3.7 / n));
    RngStream a(1, 2), b(1, 2);
    for (int i = 0; i < 20; ++i) CHECK(poisson_count(a, 12.5) == poisson_count(b, 12.5));
}

TEST_CASE("bridge structure and moments", "[sampling]") {
    RngStream rng(4, 4);
    const Point x0{0.3, -0.2};
    const auto one = sample_bridge(rng, x0, 1, 1.0);
    CHECK(one.size() == 1);
    CHECK(one.coords == std::vector<double>(x0));
    const auto b = sample_bridge(rng, x0, 7, 1.0);
    CHECK(b.size() == 7);
    CHECK(b[0][0] == x0[0]);
    CHECK(b[0][1] == x0[1]);

    const double alpha = std::numbers::pi;
    const double tau = 0.5 / alpha;
    const int n = 100000;
    std::vector<double> x1_k2, x1_k3;
    double mid_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto b2 = sample_bridge(rng, Point{0.0}, 2, alpha);
        x1_k2.push_back(b2[1][0]);
        const auto b3 = sample_bridge(rng, Point{0.0}, 3, alpha);
        x1_k3.push_back(b3[1][0]);
        const auto b6 = sample_bridge(rng, Point{1.0}, 6, alpha);
        mid_sum += b6[3][0];
    }
    // k=2: x1 ~ N(x0, τ/2); k=3: x1 ~ N(x0, 2τ/3)
    const auto m2 = mean_and_stderr(x1_k2);
    CHECK(std::abs(m2.mean) < 4 * m2.stderr_);
    CHECK(m2.sd * m2.sd == Approx(tau / 2).epsilon(0.02));
    const double crit = 1.949 / std::sqrt(static_cast<double>(n));  // KS level 0.001
    CHECK(ks_statistic(x1_k3, std::sqrt(2 * tau / 3)) < crit);
    CHECK(ks_statistic(x1_k2, std::sqrt(tau / 2)) < crit);
    CHECK(std::abs(mid_sum / n - 1.0) < 4 * std::sqrt(tau) / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("escaping walk basic contracts", "[sampling]") {
    const Box A = Box::cube(3, 0.0, 1.0);
    const double alpha = std::numbers::pi;
    const double R = escape_radius_for(A, 1e-4);
    CHECK(return_probability_bound(A, R) == Approx(1e-4).epsilon(1e-12));
    CHECK(return_probability_bound(A, R) < 1.0001e-4);
    RngStream rng(8, 1);
    for (int i = 0; i < 200; ++i) {
        const Point x0{rng.uniform(), rng.uniform(), rng.uniform()};
        const auto w = sample_escaping_walk(rng, x0, A, alpha, R);
        CHECK(w.visits >= 1);
        CHECK_FALSE(w.truncated);
        CHECK(w.return_bound <= 1e-4 * 1.0000001);
        // path ends at the first point after the last visit
        CHECK_FALSE(A.contains(w.path[w.path.size() - 1]));
        CHECK(A.contains(w.path[w.path.size() - 2]));
        if (w.excursions.empty()) {
            std::int64_t count = 0;
            for (std::size_t j = 0; j < w.path.size(); ++j) count += A.contains(w.path[j]) ? 1 : 0;
            CHECK(count == w.visits);
        }
    }
    const Box far = Box::cube(3, 100.0, 101.0);
    int zero = 0;
    for (int i = 0; i < 200; ++i) {
        const auto w = sample_escaping_walk(rng, Point{0.5, 0.5, 0.5}, far, alpha, 10.0);
        zero += w.visits == 0 ? 1 : 0;
        CHECK(w.path.size() == 1);
    }
    CHECK(zero == 200);
    CHECK_THROWS_AS(sample_escaping_walk(rng, Point{0.5, 0.5}, Box::cube(2, 0.0, 1.0), alpha, 10.0), TransienceError);
    CHECK_THROWS_AS(sample_escaping_walk(rng, Point{0.5, 0.5, 0.5}, A, alpha, 0.5), ParameterError);
}

TEST_CASE("escaping walk step cap sets the truncated flag", "[sampling]") {
    const Box A = Box::cube(3, 0.0, 1.0);
    WalkOptions opt;
    opt.iteration_cap = 5;
    opt.allow_leaps = false;
    RngStream rng(2, 2);
    const auto w = sample_escaping_walk(rng, Point{0.5, 0.5, 0.5}, A, 1.0, 1e6, opt);
    CHECK(w.truncated);
    CHECK(w.return_bound == 1.0);
    CHECK_FALSE(A.contains(w.path[w.path.size() - 1]));
}

TEST_CASE("leaping walk matches direct walk in distribution", "[sampling]") {
    const Box A = Box::cube(3, 0.0, 1.0);
    const double alpha = std::numbers::pi;
    const double R = 25.0;
    WalkOptions direct;
    direct.allow_leaps = false;
    RngStream r1(21, 1), r2(21, 2);
    const int n = 20000;
    std::vector<double> v1, v2, e1, e2;
    for (int i = 0; i < n; ++i) {
        const Point x0{0.2, 0.5, 0.9};
        const auto a = sample_walk_record(r1, x0, A, alpha, R);
        const auto b = sample_walk_record(r2, x0, A, alpha, R, direct);
        v1.push_back(static_cast<double>(a.visits));
        v2.push_back(static_cast<double>(b.visits));
        e1.push_back(a.visits == 1 ? 1.0 : 0.0);
        e2.push_back(b.visits == 1 ? 1.0 : 0.0);
    }
    const auto m1 = mean_and_stderr(v1), m2 = mean_and_stderr(v2);
    CHECK(std::abs(m1.mean - m2.mean) < 4 * std::hypot(m1.stderr_, m2.stderr_));
    const auto q1 = mean_and_stderr(e1), q2 = mean_and_stderr(e2);
    CHECK(std::abs(q1.mean - q2.mean) < 4 * std::hypot(q1.stderr_, q2.stderr_));
}

TEST_CASE("gap filling matches brute-force conditioned bridge", "[sampling]") {
    const double tau = 0.5;
    const Point a{2.0, 0.0, 0.0}, b{1.5, 0.4, -0.2};
    WalkGap g{0, 6, 0, 1.0, 1.0};
    RngStream rng(31, 0);
    const int n = 40000;
    std::vector<double> fill_mid, brute_mid, fill_min, brute_min;
    for (int i = 0; i < n; ++i) {
        PointList out(3);
        REQUIRE(detail::fill_gap(rng, a, b, g, tau, 100000, out));
        REQUIRE(out.size() == 5);
        double mn = 1e9;
        for (std::size_t j = 0; j < out.size(); ++j) {
            CHECK(out[j][0] > 1.0);
            mn = std::min(mn, out[j][0]);
        }
        fill_mid.push_back(out[2][0]);
        fill_min.push_back(mn);
    }
    while (static_cast<int>(brute_mid.size()) < n) {
        const Point zero{0.0, 0.0, 0.0};
        // unconditioned grid bridge from a to b
        std::vector<double> xs{a[0]};
        double prev = a[0];
        for (int j = 1; j < 6; ++j) {
            const double rem = 6 - j + 1;
            const double z = prev + (b[0] - prev) / rem + std::sqrt(tau * (rem - 1) / rem) * rng.normal();
            xs.push_back(z);
            prev = z;
        }
        xs.push_back(b[0]);
        double keep = 1.0;
        for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
            const double u0 = xs[j] - 1.0, u1 = xs[j + 1] - 1.0;
            if (u0 <= 0 || u1 <= 0) { keep = 0; break; }
            keep *= 1 - std::exp(-2 * u0 * u1 / tau);
        }
        if (rng.uniform() < keep) {
            brute_mid.push_back(xs[3]);
            brute_min.push_back(*std::min_element(xs.begin() + 1, xs.end() - 1));
        }
    }
    const auto f = mean_and_stderr(fill_mid), bm = mean_and_stderr(brute_mid);
    CHECK(std::abs(f.mean - bm.mean) < 4 * std::hypot(f.stderr_, bm.stderr_));
    CHECK(std::abs(f.sd - bm.sd) < 0.03 * bm.sd);
    const auto fm = mean_and_stderr(fill_min), bmm = mean_and_stderr(brute_min);
    CHECK(std::abs(fm.mean - bmm.mean) < 4 * std::hypot(fm.stderr_, bmm.stderr_));
}

TEST_CASE("mean visits from a uniform root match the kernel integral", "[sampling]") {
    const Box A = Box::cube(3, 0.0, 1.0);
    const double alpha = std::numbers::pi;
    ModelParams p;
    p.d = 3;
    p.alpha = alpha;
    p.lambda = 1.0;
    p.series_tol = 1e-9;
    // ∫_A∫_A K(x,y) = ∫_{[-1,1]^3} K(|u|) Π(1-|u_i|) du = 8 ∫_{[0,1]^3} K(|u|) Π(1-u_i) du
    const auto rule = composite_gauss_legendre(8, 3, 0.0, 1.0);
    double I = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        for (std::size_t j = 0; j < rule.nodes.size(); ++j)
            for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                const double u = rule.nodes[i], v = rule.nodes[j], w = rule.nodes[k];
                I += rule.weights[i] * rule.weights[j] * rule.weights[k] * (1 - u) * (1 - v) * (1 - w) *
                     k_kernel_r2(u * u + v * v + w * w, p).value;
            }
    I *= 8.0;
    const double expected = 1.0 + 2.0 * I / A.volume();
    const double R = escape_radius_for(A, 1e-4);
    RngStream rng(77, 0);
    std::vector<double> visits;
    for (int i = 0; i < 20000; ++i) {
        const Point x0{rng.uniform(), rng.uniform(), rng.uniform()};
        const auto f = sample_walk_record(rng, x0, A, alpha, R);
        const auto b = sample_walk_record(rng, x0, A, alpha, R);
        visits.push_back(static_cast<double>(f.visits + b.visits - 1));
    }
    const auto m = mean_and_stderr(visits);
    // escape truncation can only remove visits; its bias is far below the statistical error
    CHECK(std::abs(m.mean - expected) < 3.5 * m.stderr_);
}
