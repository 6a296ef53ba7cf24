#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "gperm/oracles.hpp"

using namespace gperm;

namespace {

ModelParams make(int d, double lambda) {
    ModelParams p;
    p.d = d;
    p.alpha = std::numbers::pi;
    p.lambda = lambda;
    return p;
}

// ∫_0^L ∫_0^L e^{-c(x-y)^2} dx dy
double gaussian_square(double c, double L) {
    return L * std::sqrt(std::numbers::pi / c) * std::erf(L * std::sqrt(c)) - (1.0 - std::exp(-c * L * L)) / c;
}

}  // namespace

TEST_CASE("mcmc short cycles match closed forms", "[oracles]") {
    const auto p = make(1, 0.5);
    const Box A = Box::cube(1, 0.0, 2.0);
    RngStream rng(11, 1);
    McmcOptions opt;
    opt.sweeps = 20000;
    opt.burn_in = 500;
    const auto run = mcmc_grand_canonical(rng, A, p, opt);
    std::vector<double> ones, twos;
    for (const auto& s : run.states) {
        const auto m = cycle_lengths(s);
        ones.push_back(m.count(1) ? static_cast<double>(m.at(1)) : 0.0);
        twos.push_back(m.count(2) ? static_cast<double>(m.at(2)) : 0.0);
    }
    const double z = p.prefactor() * p.lambda;
    const double target1 = z * A.volume();
    const double target2 = 0.5 * p.lambda * p.lambda * (p.alpha / std::numbers::pi) * gaussian_square(2.0 * p.alpha, 2.0);
    const auto m1 = batch_means(ones);
    const auto m2 = batch_means(twos);
    CHECK(std::abs(m1.mean - target1) < 4.0 * m1.stderr_);
    CHECK(std::abs(m2.mean - target2) < 4.0 * m2.stderr_);
    for (int k = 0; k < 4; ++k) CHECK(run.accepted[k] > 0);
}

TEST_CASE("mcmc state stays a permutation inside the window", "[oracles]") {
    const auto p = make(2, 0.8);
    const Box A = Box::cube(2, 0.0, 1.5);
    RngStream rng(12, 1);
    McmcOptions opt;
    opt.sweeps = 300;
    opt.burn_in = 0;
    const auto run = mcmc_grand_canonical(rng, A, p, opt);
    for (const auto& s : run.states) {
        std::vector<int> hit(s.size(), 0);
        for (auto j : s.sigma) ++hit.at(j);
        for (int h : hit) CHECK(h == 1);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(A.contains(s.points[i]));
    }
    RngStream bad(1, 1);
    CHECK_THROWS_AS(mcmc_grand_canonical(bad, Box::cube(1, 0, 1), p), ParameterError);
}

TEST_CASE("cox field moments", "[oracles]") {
    const auto p = make(3, 0.5);
    const CoxGrid grid{Box::cube(3, 0.0, 1.0), {4, 4, 4}};
    const CoxField field(grid, p);
    CHECK(field.residual() < 1e-10);
    const double rho = total_density(p).value;
    const std::size_t i = 0, j = 1, far = grid.size() - 1;
    const double kij = field.covariance(i, j), kfar = field.covariance(i, far);
    RngStream rng(13, 1);
    std::vector<double> mean, pair, pair_far, counts;
    for (int r = 0; r < 6000; ++r) {
        const auto s = field.sample(rng);
        mean.push_back(s.intensity[i]);
        pair.push_back(s.intensity[i] * s.intensity[j]);
        pair_far.push_back(s.intensity[i] * s.intensity[far]);
        counts.push_back(static_cast<double>(s.counts[i]) * static_cast<double>(s.counts[j]) / (grid.cell_volume() * grid.cell_volume()));
    }
    const auto m = mean_and_stderr(mean);
    const auto pm = mean_and_stderr(pair);
    const auto pf = mean_and_stderr(pair_far);
    const auto cm = mean_and_stderr(counts);
    CHECK(std::abs(m.mean - rho) < 4.0 * m.stderr_);
    CHECK(std::abs(pm.mean - (rho * rho + kij * kij)) < 4.0 * pm.stderr_);
    CHECK(std::abs(pf.mean - (rho * rho + kfar * kfar)) < 4.0 * pf.stderr_);
    CHECK(std::abs(cm.mean - (rho * rho + kij * kij)) < 4.0 * cm.stderr_);
}

TEST_CASE("shifted cox field superposes loops and interlacements", "[oracles]") {
    const auto p = make(3, 1.0);
    const double rho = 3.0;
    const double rc = critical_density(p.alpha, 3);
    const double beta = rho - rc;
    const CoxGrid grid{Box::cube(3, 0.0, 1.0), {3, 3, 3}};
    const CoxField field(grid, p, supercritical_shift(rho, p));
    const std::size_t i = 0, j = 1;
    const double k0 = field.variance(i), kij = field.covariance(i, j);
    RngStream rng(14, 1);
    std::vector<double> mean, pair;
    for (int r = 0; r < 6000; ++r) {
        const auto s = field.sample(rng);
        mean.push_back(s.intensity[i]);
        pair.push_back(s.intensity[i] * s.intensity[j]);
    }
    const auto m = mean_and_stderr(mean);
    const auto pm = mean_and_stderr(pair);
    CHECK(std::abs(m.mean - (k0 + beta)) < 4.0 * m.stderr_);
    const double target = (k0 + beta) * (k0 + beta) + kij * kij + 2.0 * beta * kij;
    CHECK(std::abs(pm.mean - target) < 4.0 * pm.stderr_);
}

TEST_CASE("cox contracts", "[oracles]") {
    const auto p = make(3, 0.5);
    CHECK_THROWS_AS(CoxField(CoxGrid{Box::cube(3, 0, 1), {17, 16, 16}}, p), SizeError);
    CHECK_THROWS_AS(CoxField(CoxGrid{Box::cube(2, 0, 1), {4, 4}}, p), ParameterError);
    CHECK_THROWS_AS(supercritical_shift(1.0, p), ParameterError);
}

TEST_CASE("loop mass identity by quadrature", "[oracles]") {
    for (int k : {2, 3}) {
        const auto r = quadrature_loop_identity(make(1, 0.7), 0.0, 1.0, k);
        INFO("k = " << k << " lhs = " << r.lhs << " rhs = " << r.rhs);
        CHECK(r.rel_err < 1e-6);
        const auto r2 = quadrature_loop_identity(make(1, 0.35), 0.0, 1.0, k);
        CHECK(r2.lhs / r.lhs == Approx(std::pow(0.5, k)).epsilon(1e-10));
    }
    // per unit length the hitting mass approaches the k-loop density over k
    const auto p = make(1, 0.9);
    double prev = 1e300;
    for (double L : {2.0, 8.0, 32.0}) {
        const auto r = quadrature_loop_identity(p, 0.0, L, 2);
        const double gap = std::abs(r.lhs / L - loop_density(2, p) / 2.0);
        CHECK(gap < prev);
        prev = gap;
    }
    CHECK(prev < 0.02 * loop_density(2, p) / 2.0);
}
