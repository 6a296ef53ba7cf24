#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "analytic.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "numerics.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace gperm {

struct EscapeSummary {
    std::int64_t iterations = 0;
    double final_distance = 0.0;
    double return_bound = 1.0;
    bool truncated = false;
};

// Retained piece of a trajectory meeting A: s marker, the visits to A, t marker.
// Excursions (index, steps) stand for `steps` unmaterialized steps between points[index] and points[index + 1], all outside A.
struct Trajectory {
    PointList points;
    std::size_t anchor_index = 0;
    std::int64_t visits = 0;
    std::vector<std::pair<std::size_t, std::int64_t>> excursions;
    EscapeSummary backward;
    EscapeSummary forward;

    std::size_t s_index() const { return 0; }
    std::size_t t_index() const { return points.size() == 0 ? 0 : points.size() - 1; }
    bool truncated() const { return backward.truncated || forward.truncated; }
    double return_bound() const { return std::min(1.0, backward.return_bound + forward.return_bound); }

    bool operator==(const Trajectory& o) const {
        auto same = [](const EscapeSummary& a, const EscapeSummary& b) {
            return a.iterations == b.iterations && a.final_distance == b.final_distance && a.return_bound == b.return_bound &&
                   a.truncated == b.truncated;
        };
        return points == o.points && anchor_index == o.anchor_index && visits == o.visits && excursions == o.excursions &&
               same(backward, o.backward) && same(forward, o.forward);
    }
};

struct InterlacementSample {
    std::vector<Trajectory> trajectories;
    Box window;
    double beta = 0.0;
    double escape_radius = 0.0;
    std::uint64_t candidates = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    // Bound on the probability that a trajectory has an unobserved return to the window.
    double return_bound() const { return std::min(1.0, 2.0 * return_probability_bound(window, escape_radius)); }
    std::size_t truncated_count() const {
        std::size_t n = 0;
        for (const auto& t : trajectories) n += t.truncated() ? 1 : 0;
        return n;
    }
};

namespace detail {

inline EscapeSummary summary_of(const EscapingWalk& w) { return {w.iterations, w.final_distance, w.return_bound, w.truncated}; }

inline void check_transient(const ModelParams& params) {
    if (params.d < 3) throw TransienceError("random interlacements require d >= 3");
    if (!(params.alpha > 0.0) || !std::isfinite(params.alpha)) throw ParameterError("alpha must be positive and finite");
}

inline Trajectory join_walks(const EscapingWalk& back, const EscapingWalk& fwd, std::int64_t visits) {
    Trajectory t;
    const int d = fwd.path.dim;
    t.points = PointList(d);
    const std::size_t nb = back.path.size();
    for (std::size_t i = nb; i-- > 1;) t.points.push_back(back.path[i]);
    t.anchor_index = t.points.size();
    for (std::size_t i = 0; i < fwd.path.size(); ++i) t.points.push_back(fwd.path[i]);
    // backward excursion after back[i] lies between combined indices anchor - i - 1 and anchor - i
    for (auto it = back.excursions.rbegin(); it != back.excursions.rend(); ++it)
        t.excursions.emplace_back(t.anchor_index - it->first - 1, it->second);
    for (const auto& [i, s] : fwd.excursions) t.excursions.emplace_back(t.anchor_index + i, s);
    t.visits = visits;
    t.backward = summary_of(back);
    t.forward = summary_of(fwd);
    return t;
}

}  // namespace detail

// Poisson(β|A|) uniform roots in A, each with independent forward and backward escaping walks, kept with probability 1/n_A.
inline InterlacementSample sample_interlacements(RngStream& rng, const Box& A, double beta, const ModelParams& params, double R,
                                                 const WalkOptions& opt = {}) {
    detail::check_transient(params);
    if (A.dim() != params.d) throw ParameterError("window dimension does not match model dimension");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("interlacement level must be positive");
    InterlacementSample out;
    out.window = A;
    out.beta = beta;
    out.escape_radius = R;
    out.seed = rng.master_seed();
    out.stream = rng.id();
    out.candidates = rng.poisson(beta * A.volume());
    Point x(static_cast<std::size_t>(params.d));
    for (std::uint64_t c = 0; c < out.candidates; ++c) {
        A.sample_uniform(rng, x);
        const auto fwd = sample_walk_record(rng, x, A, params.alpha, R, opt);
        const auto bwd = sample_walk_record(rng, x, A, params.alpha, R, opt);
        const std::int64_t nA = fwd.visits + bwd.visits - 1;
        if (!(rng.uniform() * static_cast<double>(nA) < 1.0)) continue;
        const auto f = materialize_walk(fwd, rng, params.alpha, opt);
        const auto b = materialize_walk(bwd, rng, params.alpha, opt);
        out.trajectories.push_back(detail::join_walks(b, f, nA));
    }
    return out;
}

inline std::int64_t visits_in(const Trajectory& t, const Box& A) {
    std::int64_t n = 0;
    for (std::size_t i = 0; i < t.points.size(); ++i) n += A.contains(t.points[i]) ? 1 : 0;
    return n;
}

// cap(A) = |A|·E[1/n_A] over uniform roots.
inline MeanError estimate_capacity(RngStream& rng, const Box& A, const ModelParams& params, std::size_t candidates, double R,
                                   const WalkOptions& opt = {}) {
    detail::check_transient(params);
    if (candidates < 2) throw InsufficientDataError("capacity estimate needs at least 2 candidates");
    std::vector<double> v(candidates);
    Point x(static_cast<std::size_t>(params.d));
    for (auto& s : v) {
        A.sample_uniform(rng, x);
        const auto fwd = sample_walk_record(rng, x, A, params.alpha, R, opt);
        const auto bwd = sample_walk_record(rng, x, A, params.alpha, R, opt);
        s = A.volume() / static_cast<double>(fwd.visits + bwd.visits - 1);
    }
    return mean_and_stderr(v);
}

// Fraction of walks from y that never return to A after time 0.
inline MeanError estimate_escape_probability(RngStream& rng, const Box& A, PointView y, const ModelParams& params, std::size_t walks,
                                             double R, const WalkOptions& opt = {}) {
    detail::check_transient(params);
    if (!A.contains(y)) throw ParameterError("probe point must lie in A");
    std::vector<double> v(walks);
    for (auto& s : v) s = sample_walk_record(rng, y, A, params.alpha, R, opt).visits == 1 ? 1.0 : 0.0;
    return mean_and_stderr(v);
}

// Monte Carlo value of e_A(y) + ∫_A e_A(x)K_1(x,y)dx, which equals 1.
inline MeanError equilibrium_identity(RngStream& rng, const Box& A, PointView y, const ModelParams& params, std::size_t walks, double R,
                                      const WalkOptions& opt = {}) {
    ModelParams p1 = params;
    p1.lambda = 1.0;
    p1.series_tol = std::max(p1.series_tol, 1e-9);
    const auto direct = estimate_escape_probability(rng, A, y, p1, walks, R, opt);
    std::vector<double> v(walks);
    Point x(static_cast<std::size_t>(params.d));
    for (auto& s : v) {
        A.sample_uniform(rng, x);
        const bool escapes = sample_walk_record(rng, x, A, p1.alpha, R, opt).visits == 1;
        s = escapes ? A.volume() * k_kernel(x, y, p1).value : 0.0;
    }
    const auto integral = mean_and_stderr(v);
    MeanError out;
    out.n = walks;
    out.mean = direct.mean + integral.mean;
    out.stderr_ = std::hypot(direct.stderr_, integral.stderr_);
    out.sd = out.stderr_ * std::sqrt(static_cast<double>(walks));
    return out;
}

}  // namespace gperm
