#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace gperm {

inline std::vector<double> gaussian_increment(RngStream& rng, double alpha, int d) {
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    const double s = std::sqrt(0.5 / alpha);
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = s * rng.normal();
    return v;
}

inline std::uint64_t poisson_count(RngStream& rng, double mean) { return rng.poisson(mean); }

// Rooted Gaussian k-bridge (x0, x_1, …, x_{k-1}); the closing step back to x0 is implicit.
inline PointList sample_bridge(RngStream& rng, PointView x0, std::int64_t k, double alpha) {
    if (k < 1) throw ParameterError("bridge length must be >= 1");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    const int d = static_cast<int>(x0.size());
    const double tau = 0.5 / alpha;
    PointList out(d);
    out.coords.resize(static_cast<std::size_t>(k) * static_cast<std::size_t>(d));
    std::copy(x0.begin(), x0.end(), out.coords.begin());
    for (std::int64_t i = 1; i < k; ++i) {
        const double rem = static_cast<double>(k - i + 1);
        const double sd = std::sqrt(tau * (rem - 1.0) / rem);
        const std::size_t base = static_cast<std::size_t>(i) * static_cast<std::size_t>(d);
        const std::size_t prev = base - static_cast<std::size_t>(d);
        for (int c = 0; c < d; ++c) {
            const double xp = out.coords[prev + static_cast<std::size_t>(c)];
            out.coords[base + static_cast<std::size_t>(c)] = xp + (x0[static_cast<std::size_t>(c)] - xp) / rem + sd * rng.normal();
        }
    }
    return out;
}

inline double escape_radius_for(const Box& A, double eps) {
    const int d = A.dim();
    if (d < 3) throw TransienceError("escaping walks require d >= 3");
    if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("escape bound must lie in (0, 1)");
    return A.circumradius() * std::pow(eps, -1.0 / (d - 2));
}

// Probability bound that a walk at distance >= R from A's center ever returns to A.
inline double return_probability_bound(const Box& A, double R) {
    const int d = A.dim();
    if (d < 3) return 1.0;
    return std::min(1.0, std::pow(A.circumradius() / R, d - 2));
}

struct WalkOptions {
    std::int64_t iteration_cap = 10'000'000;
    std::int64_t max_gap_fill = std::int64_t{1} << 16;
    int crossing_attempt_cap = 100000;
    bool allow_leaps = true;
};

// A leap of `steps` grid steps between stored points `start` and `start+1` that never crosses `level` along `axis`.
struct WalkGap {
    std::size_t start = 0;
    std::int64_t steps = 0;
    int axis = 0;
    double level = 0.0;
    double side = 1.0;
};

struct WalkRecord {
    PointList points;
    std::vector<WalkGap> gaps;
    std::int64_t visits = 0;
    std::int64_t last_visit = -1;
    std::int64_t iterations = 0;
    double final_distance = 0.0;
    double return_bound = 1.0;
    bool truncated = false;
};

// Retained walk from x0 through the first point after the last visit; oversized gaps stay compressed.
struct EscapingWalk {
    PointList path;
    std::vector<std::pair<std::size_t, std::int64_t>> excursions;
    std::int64_t visits = 0;
    std::int64_t iterations = 0;
    double final_distance = 0.0;
    double return_bound = 1.0;
    bool truncated = false;
};

namespace detail {

inline double side_distance(double x, double level, double side) { return side * (x - level); }

// Fills the interior of a non-crossing leap by exact sequential rejection.
inline bool fill_gap(RngStream& rng, PointView a, PointView b, const WalkGap& g, double tau, int attempt_cap, PointList& out) {
    const int d = static_cast<int>(a.size());
    std::vector<double> prev(a.begin(), a.end());
    std::vector<double> z(static_cast<std::size_t>(d));
    bool ok = true;
    const auto ax = static_cast<std::size_t>(g.axis);
    const double ub = detail::side_distance(b[ax], g.level, g.side);
    for (std::int64_t j = 1; j < g.steps; ++j) {
        const double rem = static_cast<double>(g.steps - j + 1);
        const double sd = std::sqrt(tau * (rem - 1.0) / rem);
        for (std::size_t c = 0; c < static_cast<std::size_t>(d); ++c) {
            if (c == ax) continue;
            z[c] = prev[c] + (b[c] - prev[c]) / rem + sd * rng.normal();
        }
        const double mean = prev[ax] + (b[ax] - prev[ax]) / rem;
        const double up = detail::side_distance(prev[ax], g.level, g.side);
        int attempts = 0;
        while (true) {
            const double cand = mean + sd * rng.normal();
            const double uz = detail::side_distance(cand, g.level, g.side);
            if (uz > 0.0) {
                const double p1 = -std::expm1(-2.0 * up * uz / tau);
                const double p2 = -std::expm1(-2.0 * uz * ub / ((rem - 1.0) * tau));
                if (rng.uniform() < p1 * p2) {
                    z[ax] = cand;
                    break;
                }
            }
            if (++attempts >= attempt_cap) {
                z[ax] = g.level + g.side * std::max(ub, 1e-12);
                ok = false;
                break;
            }
        }
        out.push_back(z);
        prev = z;
    }
    return ok;
}

inline std::vector<double> face_gaps(const Box& A, PointView x, int& axis, double& level, double& side) {
    const auto d = x.size();
    std::vector<double> g(d, 0.0);
    double best = -1.0;
    for (std::size_t i = 0; i < d; ++i) {
        double gi = 0.0;
        double lv = 0.0;
        double sd = 1.0;
        if (x[i] >= A.upper[i]) {
            gi = x[i] - A.upper[i];
            lv = A.upper[i];
            sd = 1.0;
        } else if (x[i] < A.lower[i]) {
            gi = A.lower[i] - x[i];
            lv = A.lower[i];
            sd = -1.0;
        }
        g[i] = gi;
        if (gi > best) {
            best = gi;
            axis = static_cast<int>(i);
            level = lv;
            side = sd;
        }
    }
    return g;
}

}  // namespace detail

// Simulates the walk skeleton until escape; far from A whole blocks of steps are leapt over
// with their no-crossing event decided exactly, so only gaps before the last visit ever need filling.
inline WalkRecord sample_walk_record(RngStream& rng, PointView x0, const Box& A, double alpha, double R,
                                     const WalkOptions& opt = {}) {
    const int d = static_cast<int>(x0.size());
    if (d < 3) throw TransienceError("escaping walks require d >= 3");
    if (A.dim() != d) throw ParameterError("box dimension does not match start point");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (!(R > A.circumradius())) throw ParameterError("escape radius must exceed the circumradius of A");
    const double tau = 0.5 / alpha;
    const double sq_tau = std::sqrt(tau);
    const Point center = A.center();
    const double R2 = R * R;
    WalkRecord rec;
    rec.points = PointList(d);
    rec.points.push_back(x0);
    if (A.contains(x0)) {
        rec.visits = 1;
        rec.last_visit = 0;
    }
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> y(static_cast<std::size_t>(d));
    auto record_point = [&](const std::vector<double>& p) {
        rec.points.push_back(p);
        if (A.contains(p)) {
            ++rec.visits;
            rec.last_visit = static_cast<std::int64_t>(rec.points.size()) - 1;
        }
    };
    while (true) {
        const double r2 = squared_distance(x, center);
        if (r2 >= R2) {
            rec.final_distance = std::sqrt(r2);
            break;
        }
        if (rec.iterations >= opt.iteration_cap) {
            rec.truncated = true;
            if (!A.contains(x)) {
                rec.final_distance = std::sqrt(r2);
                break;
            }
        }
        ++rec.iterations;
        int axis = 0;
        double level = 0.0;
        double side = 1.0;
        const auto g = detail::face_gaps(A, x, axis, level, side);
        const double D = g[static_cast<std::size_t>(axis)];
        const auto m = static_cast<std::int64_t>(std::floor(D * D / (64.0 * tau)));
        if (m < 2 || rec.truncated || !opt.allow_leaps) {
            for (int c = 0; c < d; ++c) y[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)] + sq_tau * rng.normal();
            record_point(y);
            x = y;
            continue;
        }
        const double lt = std::sqrt(static_cast<double>(m) * tau);
        for (int c = 0; c < d; ++c) y[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)] + lt * rng.normal();
        const double u = D;
        const double v = detail::side_distance(y[static_cast<std::size_t>(axis)], level, side);
        const double p_cross = v <= 0.0 ? 1.0 : std::exp(-2.0 * u * v / (static_cast<double>(m) * tau));
        if (rng.uniform() >= p_cross) {
            rec.points.push_back(y);
            rec.gaps.push_back({rec.points.size() - 2, m, axis, level, side});
            x = y;
            continue;
        }
        // Crossing leap: draw the grid path given the crossing event by rejection.
        PointList seg(d);
        bool accepted = false;
        for (int attempt = 0; attempt < opt.crossing_attempt_cap && !accepted; ++attempt) {
            seg.coords.clear();
            std::vector<double> prev = x;
            double keep = 1.0;
            bool crossed = false;
            for (std::int64_t j = 1; j <= m; ++j) {
                std::vector<double> z(static_cast<std::size_t>(d));
                if (j < m) {
                    const double rem = static_cast<double>(m - j + 1);
                    const double sd = std::sqrt(tau * (rem - 1.0) / rem);
                    for (int c = 0; c < d; ++c) {
                        const auto cu = static_cast<std::size_t>(c);
                        z[cu] = prev[cu] + (y[cu] - prev[cu]) / rem + sd * rng.normal();
                    }
                    seg.push_back(z);
                } else {
                    z = y;
                }
                const double a0 = detail::side_distance(prev[static_cast<std::size_t>(axis)], level, side);
                const double a1 = detail::side_distance(z[static_cast<std::size_t>(axis)], level, side);
                if (a1 <= 0.0)
                    crossed = true;
                else if (!crossed)
                    keep *= -std::expm1(-2.0 * a0 * a1 / tau);
                prev = std::move(z);
            }
            const double p_given_grid = crossed ? 1.0 : 1.0 - keep;
            accepted = rng.uniform() < p_given_grid;
        }
        if (!accepted) rec.truncated = true;
        for (std::size_t i = 0; i < seg.size(); ++i) {
            const auto pi = seg[i];
            record_point(std::vector<double>(pi.begin(), pi.end()));
        }
        record_point(y);
        x = y;
    }
    rec.return_bound = rec.truncated ? 1.0 : return_probability_bound(A, std::max(rec.final_distance, R));
    return rec;
}

// Materializes the retained part of a record: up to the first point after the last visit.
inline EscapingWalk materialize_walk(const WalkRecord& rec, RngStream& rng, double alpha, const WalkOptions& opt = {}) {
    EscapingWalk w;
    w.visits = rec.visits;
    w.iterations = rec.iterations;
    w.final_distance = rec.final_distance;
    w.return_bound = rec.return_bound;
    w.truncated = rec.truncated;
    const int d = rec.points.dim;
    w.path = PointList(d);
    const std::size_t n = rec.points.size();
    std::size_t last = rec.last_visit < 0 ? 0 : static_cast<std::size_t>(rec.last_visit) + 1;
    if (last >= n) last = n - 1;
    const double tau = 0.5 / alpha;
    std::size_t gi = 0;
    for (std::size_t i = 0; i <= last; ++i) {
        w.path.push_back(rec.points[i]);
        while (gi < rec.gaps.size() && rec.gaps[gi].start < i) ++gi;
        if (i == last) break;
        if (gi < rec.gaps.size() && rec.gaps[gi].start == i) {
            const auto& g = rec.gaps[gi];
            if (g.steps > opt.max_gap_fill) {
                w.excursions.emplace_back(w.path.size() - 1, g.steps);
            } else if (!detail::fill_gap(rng, rec.points[i], rec.points[i + 1], g, tau, opt.crossing_attempt_cap, w.path)) {
                w.truncated = true;
            }
        }
    }
    return w;
}

inline EscapingWalk sample_escaping_walk(RngStream& rng, PointView x0, const Box& A, double alpha, double R,
                                         const WalkOptions& opt = {}) {
    const auto rec = sample_walk_record(rng, x0, A, alpha, R, opt);
    return materialize_walk(rec, rng, alpha, opt);
}

}  // namespace gperm
