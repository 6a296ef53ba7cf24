#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "gperm/estimators.hpp"

using namespace gperm;

namespace {

PointList poisson_points(RngStream& rng, const Box& W, double rate) {
    PointList pts(W.dim());
    const auto n = rng.poisson(rate * W.volume());
    Point x(static_cast<std::size_t>(W.dim()));
    for (std::uint64_t i = 0; i < n; ++i) {
        W.sample_uniform(rng, x);
        pts.push_back(x);
    }
    return pts;
}

ModelParams params_d(int d, double lambda) {
    ModelParams p;
    p.d = d;
    p.alpha = std::numbers::pi;
    p.lambda = lambda;
    return p;
}

}  // namespace

TEST_CASE("z score and report documents", "[estimators]") {
    CHECK(z_score(1.0, 0.3, 0.0, 0.4) == Approx(2.0));
    CHECK(z_score(1.0, 0.0, 1.0, 0.0) == 0.0);
    CHECK(std::isinf(z_score(1.0, 0.0, 0.0, 0.0)));
    MeanError m;
    m.mean = 1.4;
    m.stderr_ = 0.1;
    m.n = 10;
    const std::vector<EstimateReport> three{make_report("a", m, 1.0, 0.0), make_report("b", m, 1.4, 0.01), make_report("c", m, 1.2, 0.0)};
    CHECK(three[0].flagged());
    CHECK(three[0].z == Approx(4.0));
    CHECK_FALSE(three[1].flagged());
    CHECK_FALSE(three[2].flagged());
    const auto doc = compare_report(three);
    CHECK(doc["flagged"] == 1);
    CHECK(doc["reports"].size() == 3);
    CHECK(compare_report(three).dump() == doc.dump());
    CHECK(compare_report_csv(three) == compare_report_csv(three));
    const auto empty = compare_report({});
    CHECK(empty["reports"].empty());
    CHECK(empty["flagged"] == 0);
    CHECK(compare_report_csv({}) == "name,estimate,stderr,target,tolerance,z,replicas,flagged\n");
}

TEST_CASE("estimators are unbiased on homogeneous Poisson input", "[estimators]") {
    const Box W = Box::cube(2, 0.0, 3.0);
    const double rate = 2.0;
    const Box b1({0.5, 0.5}, {1.0, 1.0}), b2({1.5, 0.5}, {2.0, 1.0}), b3({0.5, 1.5}, {1.0, 2.0});
    const Box B({1.0, 1.0}, {2.0, 2.0});
    const double c = 0.3;
    int flagged = 0;
    for (int seed = 0; seed < 100; ++seed) {
        PointEnsemble ens;
        RngStream rng(71, static_cast<std::uint64_t>(seed));
        for (int r = 0; r < 100; ++r) ens.push_back(poisson_points(rng, W, rate));
        flagged += density_estimate(ens, W, rate, 0.0).flagged() ? 1 : 0;
        flagged += correlation_estimate(ens, {b1, b2}, rate * rate, 0.0).flagged() ? 1 : 0;
        flagged += correlation_estimate(ens, {b1, b2, b3}, rate * rate * rate, 0.0, &W).flagged() ? 1 : 0;
        flagged += laplace_mc(ens, B, c, std::exp(rate * B.volume() * std::expm1(-c)), 0.0).flagged() ? 1 : 0;
    }
    CHECK(flagged <= 4);
}

TEST_CASE("estimator contracts", "[estimators]") {
    const Box W = Box::cube(1, 0.0, 4.0);
    CHECK_THROWS_AS(density_estimate({}, W, 1.0, 0.0), InsufficientDataError);
    CHECK_THROWS_AS(laplace_mc({}, W, 1.0, 1.0, 0.0), InsufficientDataError);
    const PointEnsemble one{PointList(1, {0.5, 1.5, 2.5})};
    CHECK_THROWS_AS(correlation_estimate(one, {Box({0.0}, {1.0}), Box({0.5}, {1.5})}, 0.0, 0.0), ParameterError);
    std::vector<Box> five;
    for (int i = 0; i < 5; ++i) five.push_back(Box({double(i)}, {i + 0.5}));
    CHECK_THROWS_AS(correlation_estimate(one, five, 0.0, 0.0), ParameterError);
    CHECK(laplace_mc(one, W, 0.0, 1.0, 0.0).estimate == 1.0);
    // n = 1 reduces to the density of the box
    const Box b({1.0}, {3.0});
    CHECK(correlation_estimate(one, {b}, 0.0, 0.0).estimate == density_estimate(one, b, 0.0, 0.0).estimate);
    // box [0, 1) translated over [0, 3]: the points cover translation lengths 0.5, 1 and 1
    const auto tiled = correlation_estimate(one, {Box({0.0}, {1.0})}, 0.0, 0.0, &W);
    CHECK(tiled.estimate == Approx(2.5 / 3.0).epsilon(1e-14));
}

TEST_CASE("kernel table", "[estimators]") {
    for (double lambda : {0.5, 1.0}) {
        const auto p = params_d(3, lambda);
        const KernelTable K(p, 48.0, 128);
        CHECK(K.error_bound() < 1e-10);
        for (double s : {0.0, 0.37, 2.0, 11.3, 47.9}) CHECK(K(s) == Approx(k_kernel_r2(s, p).value).epsilon(1e-10).margin(1e-12));
    }
}

TEST_CASE("pair box averages", "[estimators]") {
    const Box B1({0.0, 0.0, 0.0}, {0.4, 0.3, 0.2}), B2({1.0, -0.2, 0.5}, {1.5, 0.2, 0.6});
    const auto one = box_average_pair([](double) { return 1.0; }, B1, B2);
    CHECK(one.value == Approx(1.0).epsilon(1e-13));
    double expect = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double ha = B1.upper[c] - B1.lower[c], hb = B2.upper[c] - B2.lower[c];
        const double dm = 0.5 * (B2.upper[c] + B2.lower[c] - B1.upper[c] - B1.lower[c]);
        expect += dm * dm + (ha * ha + hb * hb) / 12.0;
    }
    CHECK(box_average_pair([](double s) { return s; }, B1, B2).value == Approx(expect).epsilon(1e-13));
    // against a brute-force 6-dimensional midpoint rule for a Gaussian
    const auto g = [](double s) { return std::exp(-2.0 * s); };
    double brute = 0.0;
    const int m = 8;
    for (int i = 0; i < m * m * m; ++i)
        for (int j = 0; j < m * m * m; ++j) {
            double s = 0.0;
            int a = i, b = j;
            for (int c = 0; c < 3; ++c) {
                const double x = B1.lower[c] + (B1.upper[c] - B1.lower[c]) * ((a % m) + 0.5) / m;
                const double y = B2.lower[c] + (B2.upper[c] - B2.lower[c]) * ((b % m) + 0.5) / m;
                s += (x - y) * (x - y);
                a /= m;
                b /= m;
            }
            brute += g(s);
        }
    brute /= std::pow(m, 6);
    const auto avg = box_average_pair(g, B1, B2);
    CHECK(avg.value == Approx(brute).epsilon(5e-3));
    CHECK(avg.error < 1e-10);
}

TEST_CASE("two-point targets shrink to the point formulas", "[estimators]") {
    const auto p = params_d(3, 0.5);
    const double h = 1e-3;
    const Box B1 = Box::cube(3, 0.0, h);
    Box B2 = B1;
    B2.lower[0] += 0.5;
    B2.upper[0] += 0.5;
    const double r2 = 0.25;
    const double K = k_kernel_r2(r2, p).value;
    const double rho = total_density(p).value;
    CHECK(loop_pair_target(B1, B2, p).value == Approx(rho * rho + K * K).epsilon(1e-5));
    const double K1 = k_kernel_r2(r2, params_d(3, 1.0)).value;
    CHECK(interlacement_pair_target(B1, B2, 0.5, p).value == Approx(0.25 + K1).epsilon(1e-5));
}

TEST_CASE("loop Laplace series", "[estimators]") {
    const auto p = params_d(1, 0.3);
    const Box B({0.0}, {1.0});
    CHECK(laplace_series_loops(B, 0.0, p).value == 1.0);
    const double t = std::expm1(-0.2);
    CHECK(laplace_series_loops(B, 0.2, p, 1).exponent == Approx(t * total_density(p).value).epsilon(1e-12));
    const auto f1 = laplace_series_loops(B, 0.2, p);
    const auto f2 = laplace_series_loops_partitions(B, 0.2, p, 3);
    CHECK(f1.validity < 1.0);
    CHECK(f1.truncation_bound < 1e-30);
    CHECK(f1.quadrature_error < 1e-10);
    CHECK(std::abs(f1.value - f2.value) <= f1.truncation_bound + f2.truncation_bound + f1.quadrature_error + f2.quadrature_error);
    CHECK(std::abs(f1.value - f2.value) > 0.0);
    CHECK_THROWS_AS(laplace_series_loops(Box({0.0}, {3.0}), 5.0, params_d(1, 0.99)), DomainError);
    CHECK_THROWS_AS(laplace_series_loops(Box::cube(3, 0.0, 1.0), 0.2, params_d(3, 0.3)), ParameterError);
}

TEST_CASE("loop Laplace functional matches the soup", "[estimators]") {
    const auto p = params_d(1, 0.3);
    const Box B({0.0}, {1.0});
    const auto series = laplace_series_loops(B, 0.2, p);
    const auto plan = plan_loop_lengths(p, B.volume(), default_k_max(p, 1e-12).k_max);
    PointEnsemble ens;
    for (int r = 0; r < 40000; ++r) {
        RngStream rng(73, static_cast<std::uint64_t>(r));
        ens.push_back(sample_points(sample_loops_hitting(rng, B, plan)));
    }
    const auto rep = laplace_mc(ens, B, 0.2, series.value, series.truncation_bound + series.quadrature_error);
    CHECK_FALSE(rep.flagged());
}

TEST_CASE("interlacement Laplace series", "[estimators]") {
    const auto p = params_d(3, 1.0);
    const Box B = Box::cube(3, 0.0, 1.0);
    CHECK(laplace_series_ri(B, 0.0, 0.2, p).value == 1.0);
    const double t = std::expm1(-0.2);
    CHECK(laplace_series_ri(B, 0.2, 0.2, p, 1).exponent == Approx(0.2 * t).epsilon(1e-12));
    const auto s = laplace_series_ri(B, 0.2, 0.2, p);
    CHECK(s.validity < 1.0);
    CHECK(s.truncation_bound < 1e-12);
    CHECK(s.quadrature_error < 1e-6);
    // second chain term equals β t² ∫∫ K_1 over the cube
    const auto two = laplace_series_ri(B, 0.2, 0.2, p, 2);
    const KernelTable K(p, 3.0);
    const double pair = box_average_pair([&](double r2) { return K(r2); }, B, B, 8).value;
    CHECK(two.exponent - 0.2 * t == Approx(0.2 * t * t * pair).epsilon(1e-6));
    CHECK_THROWS_AS(laplace_series_ri(Box::cube(2, 0.0, 1.0), 0.2, 0.2, params_d(2, 0.5)), TransienceError);
}
