#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "analytic.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace gperm {

namespace detail {

inline int compare_points(PointView a, PointView b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return -1;
        if (a[i] > b[i]) return 1;
    }
    return 0;
}

}  // namespace detail

// Unrooted loop stored in its canonical rotation (lexicographically minimal rotation).
struct Loop {
    PointList points;

    Loop() = default;
    explicit Loop(PointList pts) : points(std::move(pts)) { canonicalize(); }

    std::size_t length() const { return points.size(); }
    int dim() const { return points.dim; }

    void canonicalize() {
        const std::size_t k = points.size();
        if (k <= 1) return;
        std::size_t best = 0;
        for (std::size_t i = 1; i < k; ++i) {
            int c = detail::compare_points(points[i], points[best]);
            for (std::size_t s = 1; c == 0 && s < k; ++s) c = detail::compare_points(points[(i + s) % k], points[(best + s) % k]);
            if (c < 0) best = i;
        }
        if (best == 0) return;
        const auto d = static_cast<std::ptrdiff_t>(points.dim);
        std::rotate(points.coords.begin(), points.coords.begin() + static_cast<std::ptrdiff_t>(best) * d, points.coords.end());
    }

    bool operator==(const Loop& o) const { return points == o.points; }
};

inline Loop rotate_loop(const Loop& loop, std::size_t j) {
    Loop out;
    out.points = loop.points;
    const std::size_t k = loop.length();
    if (k == 0) return out;
    const auto d = static_cast<std::ptrdiff_t>(loop.dim());
    std::rotate(out.points.coords.begin(), out.points.coords.begin() + static_cast<std::ptrdiff_t>(j % k) * d, out.points.coords.end());
    return out;
}

inline std::int64_t visits_in(const PointList& pts, const Box& A) {
    std::int64_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) n += A.contains(pts[i]) ? 1 : 0;
    return n;
}

inline std::int64_t visits_in(const Loop& loop, const Box& A) { return visits_in(loop.points, A); }

struct LoopSoupSample {
    std::vector<Loop> loops;
    Box window;
    ModelParams params;
    std::int64_t k_max = 0;
    double tail_bound = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct KMaxChoice {
    std::int64_t k_max = 1;
    double tail_bound = 0.0;
    bool capped = false;
};

// Smallest K whose neglected point density Σ_{k>K} ρ_k is below rel_eps·ρ(λ), limited by cap.
inline KMaxChoice default_k_max(const ModelParams& params, double rel_eps = 1e-4, std::int64_t cap = std::int64_t{1} << 20) {
    validate_admissible(params);
    if (params.lambda == 0.0) return {1, 0.0, false};
    const double rho = total_density(params).value;
    const double pref = params.prefactor();
    const double p = 0.5 * params.d;
    const double lam = params.lambda;
    auto bound = [&](double K) {
        double b = std::numeric_limits<double>::infinity();
        if (lam < 1.0) b = pref * std::pow(lam, K + 1.0) * std::pow(K + 1.0, -p) / (1.0 - lam);
        if (p > 1.0) b = std::min(b, pref * std::pow(lam, K) * std::pow(K, 1.0 - p) / (p - 1.0));
        return b;
    };
    const double target = rel_eps * rho;
    if (bound(1.0) < target) return {1, bound(1.0), false};
    std::int64_t hi = 2;
    while (bound(static_cast<double>(hi)) >= target) {
        if (hi >= cap) return {cap, bound(static_cast<double>(cap)), true};
        hi = std::min(cap, hi * 2);
    }
    std::int64_t lo = hi / 2;
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (bound(static_cast<double>(mid)) < target)
            hi = mid;
        else
            lo = mid;
    }
    return {hi, bound(static_cast<double>(hi)), false};
}

// Candidate counts per loop length: lengths below `direct_limit` individually, longer lengths in dyadic blocks.
struct LoopLengthPlan {
    struct Block {
        std::int64_t first = 1;
        std::int64_t last = 1;
        double mean = 0.0;
    };
    std::vector<Block> blocks;
    ModelParams params;
    double volume = 0.0;
    std::int64_t k_max = 0;
    double tail_density = 0.0;
};

inline LoopLengthPlan plan_loop_lengths(const ModelParams& params, double volume, std::int64_t k_max, std::int64_t direct_limit = 1024) {
    validate_admissible(params);
    if (k_max < 1) throw ParameterError("k_max must be >= 1");
    LoopLengthPlan plan;
    plan.params = params;
    plan.volume = volume;
    plan.k_max = k_max;
    if (params.lambda == 0.0) return plan;
    const double pref = params.prefactor();
    const double lnl = std::log(params.lambda);
    auto rho_k = [&](std::int64_t k) { return pref * std::exp(lnl * static_cast<double>(k)) * detail::inv_kpow(static_cast<double>(k), params.d); };
    std::int64_t k = 1;
    while (k <= k_max) {
        LoopLengthPlan::Block b;
        b.first = k;
        b.last = k < direct_limit ? k : std::min(k_max, 2 * k - 1);
        double s = 0.0;
        for (std::int64_t j = b.first; j <= b.last; ++j) s += rho_k(j);
        b.mean = s * volume;
        plan.blocks.push_back(b);
        k = b.last + 1;
    }
    double kept = 0.0;
    for (const auto& b : plan.blocks) kept += b.mean / volume;
    const auto total = total_density(params);
    plan.tail_density = std::max(0.0, total.value - kept) + total.tail_bound;
    return plan;
}

inline LoopSoupSample sample_loops_hitting(RngStream& rng, const Box& A, const LoopLengthPlan& plan) {
    const ModelParams& params = plan.params;
    if (A.dim() != params.d) throw ParameterError("window dimension does not match model dimension");
    LoopSoupSample out;
    out.window = A;
    out.params = params;
    out.k_max = plan.k_max;
    out.tail_bound = plan.tail_density;
    out.seed = rng.master_seed();
    out.stream = rng.id();
    const double lnl = params.lambda > 0.0 ? std::log(params.lambda) : 0.0;
    Point root(static_cast<std::size_t>(params.d));
    for (const auto& block : plan.blocks) {
        const std::uint64_t n = rng.poisson(block.mean);
        for (std::uint64_t c = 0; c < n; ++c) {
            std::int64_t k = block.first;
            if (block.last > block.first) {
                // length within the block ∝ ρ_k, by rejection against the block's first length
                const double w0 = lnl * static_cast<double>(block.first) + std::log(detail::inv_kpow(static_cast<double>(block.first), params.d));
                while (true) {
                    k = block.first + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(block.last - block.first + 1)));
                    const double w = lnl * static_cast<double>(k) + std::log(detail::inv_kpow(static_cast<double>(k), params.d));
                    if (rng.uniform() < std::exp(w - w0)) break;
                }
            }
            A.sample_uniform(rng, root);
            PointList body = sample_bridge(rng, root, k, params.alpha);
            const std::int64_t nA = visits_in(body, A);
            if (rng.uniform() * static_cast<double>(nA) < 1.0) out.loops.emplace_back(std::move(body));
        }
    }
    return out;
}

inline LoopSoupSample sample_loops_hitting(RngStream& rng, const Box& A, const ModelParams& params, std::int64_t k_max) {
    return sample_loops_hitting(rng, A, plan_loop_lengths(params, A.volume(), k_max));
}

inline LoopSoupSample filter_contained(const LoopSoupSample& sample, const Box& A) {
    LoopSoupSample out = sample;
    out.loops.clear();
    for (const auto& l : sample.loops)
        if (visits_in(l, A) == static_cast<std::int64_t>(l.length())) out.loops.push_back(l);
    out.window = A;
    return out;
}

struct CycleCount {
    std::int64_t loops = 0;
    std::int64_t points = 0;
};

inline std::map<std::int64_t, CycleCount> cycle_spectrum(const std::vector<Loop>& loops) {
    std::map<std::int64_t, CycleCount> m;
    for (const auto& l : loops) {
        auto& c = m[static_cast<std::int64_t>(l.length())];
        ++c.loops;
        c.points += static_cast<std::int64_t>(l.length());
    }
    return m;
}

inline std::map<std::int64_t, CycleCount> cycle_spectrum(const LoopSoupSample& s) { return cycle_spectrum(s.loops); }

}  // namespace gperm
