#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "analytic.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "interlacements.hpp"
#include "loopsoup.hpp"
#include "rng.hpp"

namespace gperm {

struct Provenance {
    std::uint64_t seed = 0;
    std::uint64_t loop_stream = 0;
    std::uint64_t interlacement_stream = 0;
    std::int64_t k_max = 0;
    double loop_tail_density = 0.0;
    double escape_radius = 0.0;
    double return_bound = 0.0;
    std::uint64_t truncated_trajectories = 0;
    bool operator==(const Provenance&) const = default;
};

struct Configuration {
    std::vector<Loop> loops;
    std::vector<Trajectory> trajectories;
    Box window;
    ModelParams params;  // lambda is the loop fugacity actually used
    double rho = 0.0;
    double beta = 0.0;
    Provenance provenance;

    bool operator==(const Configuration& o) const = default;
};

struct GrpOptions {
    std::int64_t k_max = 0;  // 0 selects default_k_max
    double k_max_rel_eps = 1e-4;
    double escape_bound = 1e-4;
    WalkOptions walk;
};

struct GrpPhase {
    double lambda = 0.0;
    double beta = 0.0;
};

inline GrpPhase grp_phase(double rho, const ModelParams& params) {
    validate_basic(params);
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("density must be positive and finite");
    if (params.d <= 2) return {fugacity_from_density(rho, params.alpha, params.d), 0.0};
    const double rc = critical_density(params.alpha, params.d);
    if (rho <= rc) return {fugacity_from_density(rho, params.alpha, params.d), 0.0};
    return {1.0, rho - rc};
}

// Loops at λ(ρ), plus interlacements at level ρ - ρ_c in the supercritical phase; the two parts use disjoint streams of `rng`.
inline Configuration assemble_grp(const RngStream& rng, const Box& A, double rho, const ModelParams& params, const GrpOptions& opt = {}) {
    if (A.dim() != params.d) throw ParameterError("window dimension does not match model dimension");
    const auto phase = grp_phase(rho, params);
    Configuration c;
    c.window = A;
    c.params = params;
    c.params.lambda = phase.lambda;
    c.rho = rho;
    c.beta = phase.beta;
    const std::int64_t k_max = opt.k_max > 0 ? opt.k_max : default_k_max(c.params, opt.k_max_rel_eps).k_max;
    RngStream loop_rng = rng.derive(1);
    const auto soup = sample_loops_hitting(loop_rng, A, plan_loop_lengths(c.params, A.volume(), k_max));
    c.loops = soup.loops;
    c.provenance.seed = rng.master_seed();
    c.provenance.loop_stream = loop_rng.id();
    c.provenance.k_max = k_max;
    c.provenance.loop_tail_density = soup.tail_bound;
    if (phase.beta > 0.0) {
        RngStream ri_rng = rng.derive(2);
        const double R = escape_radius_for(A, opt.escape_bound);
        const auto ri = sample_interlacements(ri_rng, A, phase.beta, c.params, R, opt.walk);
        c.trajectories = ri.trajectories;
        c.provenance.interlacement_stream = ri_rng.id();
        c.provenance.escape_radius = R;
        c.provenance.return_bound = ri.return_bound();
        c.provenance.truncated_trajectories = ri.truncated_count();
    }
    return c;
}

inline std::int64_t points_in(const Configuration& c, const Box& W) {
    std::int64_t n = 0;
    for (const auto& l : c.loops) n += visits_in(l, W);
    for (const auto& t : c.trajectories) n += visits_in(t, W);
    return n;
}

enum class OrbitKind { cycle, path };

struct Element {
    OrbitKind kind = OrbitKind::cycle;
    std::size_t first = 0;
    std::size_t length = 0;
    bool operator==(const Element&) const = default;
};

// Points with successor map; open path ends carry -1. hidden_steps[i] is the number of walk steps on the edge i -> succ[i].
struct SpatialPermutation {
    PointList points;
    std::vector<std::int64_t> succ;
    std::vector<std::int64_t> pred;
    std::vector<std::int64_t> hidden_steps;
    std::vector<std::size_t> element_of;
    std::vector<Element> elements;
    std::vector<Trajectory> path_meta;  // per path element, without points

    std::size_t size() const { return points.size(); }
    bool operator==(const SpatialPermutation& o) const = default;
};

namespace detail {

inline void check_no_coincident(const PointList& pts) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return compare_points(pts[a], pts[b]) < 0; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (compare_points(pts[order[i - 1]], pts[order[i]]) == 0) throw IntegrityError("coincident points in configuration");
}

}  // namespace detail

inline SpatialPermutation to_permutation(const Configuration& c) {
    SpatialPermutation p;
    p.points = PointList(c.params.d);
    auto add_element = [&](const PointList& pts, OrbitKind kind) {
        Element e{kind, p.points.size(), pts.size()};
        const auto base = static_cast<std::int64_t>(e.first);
        const auto k = static_cast<std::int64_t>(e.length);
        for (std::int64_t i = 0; i < k; ++i) {
            if (kind == OrbitKind::cycle) {
                p.succ.push_back(base + (i + 1) % k);
                p.pred.push_back(base + (i + k - 1) % k);
            } else {
                p.succ.push_back(i + 1 < k ? base + i + 1 : -1);
                p.pred.push_back(i > 0 ? base + i - 1 : -1);
            }
            p.hidden_steps.push_back(1);
            p.element_of.push_back(p.elements.size());
        }
        p.points.append(pts);
        p.elements.push_back(e);
    };
    for (const auto& l : c.loops) add_element(l.points, OrbitKind::cycle);
    for (const auto& t : c.trajectories) {
        const std::size_t first = p.points.size();
        add_element(t.points, OrbitKind::path);
        for (const auto& [i, steps] : t.excursions) p.hidden_steps[first + i] = steps;
        Trajectory meta = t;
        meta.points = PointList(t.points.dim);
        p.path_meta.push_back(std::move(meta));
    }
    detail::check_no_coincident(p.points);
    return p;
}

inline Configuration to_configuration(const SpatialPermutation& p, const Configuration& header) {
    Configuration c = header;
    c.loops.clear();
    c.trajectories.clear();
    std::size_t path_no = 0;
    for (const auto& e : p.elements) {
        PointList pts(p.points.dim);
        std::size_t i = e.first;
        if (e.kind == OrbitKind::path)
            while (p.pred[i] >= 0) i = static_cast<std::size_t>(p.pred[i]);
        for (std::size_t n = 0; n < e.length; ++n) {
            pts.push_back(p.points[i]);
            if (p.succ[i] < 0) break;
            i = static_cast<std::size_t>(p.succ[i]);
        }
        if (e.kind == OrbitKind::cycle) {
            c.loops.emplace_back(std::move(pts));
        } else {
            Trajectory t = p.path_meta.at(path_no++);
            t.points = std::move(pts);
            c.trajectories.push_back(std::move(t));
        }
    }
    return c;
}

// Cycle lengths of the finite cycles of σ, found by following successors.
inline std::map<std::int64_t, std::int64_t> cycle_type(const SpatialPermutation& p) {
    std::map<std::int64_t, std::int64_t> m;
    std::vector<char> seen(p.size(), 0);
    for (std::size_t s = 0; s < p.size(); ++s) {
        if (seen[s] || p.elements[p.element_of[s]].kind != OrbitKind::cycle) continue;
        std::int64_t len = 0;
        std::size_t i = s;
        do {
            seen[i] = 1;
            ++len;
            i = static_cast<std::size_t>(p.succ[i]);
        } while (i != s);
        ++m[len];
    }
    return m;
}

struct HamiltonianWeight {
    double hamiltonian = 0.0;
    double log_weight = 0.0;
    double weight() const { return std::exp(log_weight); }
};

inline double log_step_density(double r2, std::int64_t steps, const ModelParams& params) {
    const double t = static_cast<double>(steps) * params.step_variance();
    return -0.5 * params.d * std::log(2.0 * std::numbers::pi * t) - r2 / (2.0 * t);
}

// H = Σ squared successor displacements; weight = λ^{#points} Π p over the edges.
inline HamiltonianWeight hamiltonian_and_weight(const PointList& pts, bool closed, const ModelParams& params) {
    HamiltonianWeight hw;
    const std::size_t k = pts.size();
    if (k == 0) return hw;
    hw.log_weight = static_cast<double>(k) * std::log(params.lambda);
    const std::size_t edges = closed ? k : k - 1;
    for (std::size_t i = 0; i < edges; ++i) {
        const double r2 = squared_distance(pts[i], pts[(i + 1) % k]);
        hw.hamiltonian += r2;
        hw.log_weight += log_step_density(r2, 1, params);
    }
    return hw;
}

inline HamiltonianWeight hamiltonian_and_weight(const Loop& loop, const ModelParams& params) {
    return hamiltonian_and_weight(loop.points, true, params);
}

inline double log_weight_of_loops(const std::vector<Loop>& loops, const ModelParams& params) {
    double s = 0.0;
    for (const auto& l : loops) s += hamiltonian_and_weight(l, params).log_weight;
    return s;
}

// Inside/outside split of a spatial permutation with respect to a window.
struct Decomposition {
    std::vector<char> inside;
    std::vector<std::size_t> I_points;
    std::vector<std::size_t> O_points;
    std::vector<std::size_t> U;
    std::vector<std::size_t> V;
    std::vector<std::vector<std::size_t>> inside_paths;    // u, points in A, v
    std::vector<std::vector<std::size_t>> outside_paths;   // v, points outside A, u; a single point when u = v
    std::vector<std::vector<std::size_t>> forward_stubs;   // v, then outside points to an open end
    std::vector<std::vector<std::size_t>> backward_stubs;  // open end, outside points, then u
    std::vector<std::vector<std::size_t>> whole_inside;    // orbits with all points in A
    std::vector<std::vector<std::size_t>> whole_outside;   // orbits with no point in A
};

inline Decomposition decompose(const SpatialPermutation& p, const Box& A) {
    Decomposition d;
    const std::size_t n = p.size();
    d.inside.resize(n);
    std::vector<char> isU(n, 0), isV(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        d.inside[i] = A.contains(p.points[i]) ? 1 : 0;
        (d.inside[i] ? d.I_points : d.O_points).push_back(i);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (d.inside[i]) continue;
        if (p.succ[i] >= 0 && d.inside[static_cast<std::size_t>(p.succ[i])]) {
            isU[i] = 1;
            d.U.push_back(i);
        }
        if (p.pred[i] >= 0 && d.inside[static_cast<std::size_t>(p.pred[i])]) {
            isV[i] = 1;
            d.V.push_back(i);
        }
    }
    std::vector<char> in_whole(n, 0);
    for (const auto& e : p.elements) {
        bool any_in = false, any_out = false;
        for (std::size_t i = e.first; i < e.first + e.length; ++i) (d.inside[i] ? any_in : any_out) = true;
        if (any_in && any_out) continue;
        for (std::size_t i = e.first; i < e.first + e.length; ++i) in_whole[i] = 1;
        std::vector<std::size_t> orbit;
        std::size_t i = e.first;
        if (e.kind == OrbitKind::path)
            while (p.pred[i] >= 0) i = static_cast<std::size_t>(p.pred[i]);
        for (std::size_t c = 0; c < e.length; ++c) {
            orbit.push_back(i);
            if (p.succ[i] < 0) break;
            i = static_cast<std::size_t>(p.succ[i]);
        }
        (any_in ? d.whole_inside : d.whole_outside).push_back(std::move(orbit));
    }
    auto next = [&](std::size_t i) { return p.succ[i]; };
    // inside paths start at U points, or at inside open path starts
    for (std::size_t s = 0; s < n; ++s) {
        if (in_whole[s] || !(isU[s] || (d.inside[s] && p.pred[s] < 0))) continue;
        std::vector<std::size_t> path{s};
        std::int64_t j = next(s);
        while (j >= 0) {
            const auto ju = static_cast<std::size_t>(j);
            path.push_back(ju);
            if (isV[ju]) break;
            j = next(ju);
        }
        d.inside_paths.push_back(std::move(path));
    }
    std::vector<char> closed_u(n, 0);
    for (std::size_t v : d.V) {
        if (isU[v]) {
            d.outside_paths.push_back({v});
            closed_u[v] = 1;
            continue;
        }
        std::vector<std::size_t> path{v};
        std::int64_t j = next(v);
        bool open = true;
        while (j >= 0) {
            const auto ju = static_cast<std::size_t>(j);
            path.push_back(ju);
            if (isU[ju]) {
                closed_u[ju] = 1;
                open = false;
                break;
            }
            j = next(ju);
        }
        (open ? d.forward_stubs : d.outside_paths).push_back(std::move(path));
    }
    for (std::size_t u : d.U) {
        if (closed_u[u]) continue;
        std::vector<std::size_t> stub{u};
        for (std::int64_t j = p.pred[u]; j >= 0; j = p.pred[static_cast<std::size_t>(j)]) stub.push_back(static_cast<std::size_t>(j));
        std::reverse(stub.begin(), stub.end());
        d.backward_stubs.push_back(std::move(stub));
    }
    return d;
}

// Indices owned by each part: inside paths own their interior points, every other part owns all its points.
inline std::vector<std::size_t> owned_points(const Decomposition& d) {
    std::vector<std::size_t> all;
    for (const auto& path : d.inside_paths) {
        const bool open_start = d.inside[path.front()];
        const bool open_end = d.inside[path.back()];
        const std::size_t lo = open_start ? 0 : 1;
        const std::size_t hi = open_end ? path.size() : path.size() - 1;
        for (std::size_t i = lo; i < hi; ++i) all.push_back(path[i]);
    }
    for (const auto* group : {&d.outside_paths, &d.forward_stubs, &d.backward_stubs, &d.whole_inside, &d.whole_outside})
        for (const auto& path : *group) all.insert(all.end(), path.begin(), path.end());
    return all;
}

// Rebuilds the successor and predecessor maps from the decomposition alone.
inline SpatialPermutation recompose(const Decomposition& d, const SpatialPermutation& shell) {
    SpatialPermutation p = shell;
    std::fill(p.succ.begin(), p.succ.end(), -1);
    std::fill(p.pred.begin(), p.pred.end(), -1);
    auto link = [&](const std::vector<std::size_t>& path) {
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            p.succ[path[i]] = static_cast<std::int64_t>(path[i + 1]);
            p.pred[path[i + 1]] = static_cast<std::int64_t>(path[i]);
        }
    };
    for (const auto* group : {&d.inside_paths, &d.outside_paths, &d.forward_stubs, &d.backward_stubs, &d.whole_inside, &d.whole_outside})
        for (const auto& path : *group) link(path);
    for (std::size_t e = 0; e < d.whole_inside.size() + d.whole_outside.size(); ++e) {
        const auto& orbit = e < d.whole_inside.size() ? d.whole_inside[e] : d.whole_outside[e - d.whole_inside.size()];
        if (p.elements[p.element_of[orbit.front()]].kind != OrbitKind::cycle) continue;
        p.succ[orbit.back()] = static_cast<std::int64_t>(orbit.front());
        p.pred[orbit.front()] = static_cast<std::int64_t>(orbit.back());
    }
    return p;
}

// Restriction of σ to I ∪ U, and of σ to O \ U.
struct ComponentMap {
    std::vector<std::pair<std::size_t, std::size_t>> arrows;
    bool operator==(const ComponentMap& o) const = default;
};

inline ComponentMap inside_component(const SpatialPermutation& p, const Box& A) {
    ComponentMap m;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.succ[i] < 0) continue;
        const auto j = static_cast<std::size_t>(p.succ[i]);
        if (A.contains(p.points[i]) || A.contains(p.points[j])) m.arrows.emplace_back(i, j);
    }
    return m;
}

inline ComponentMap outside_component(const SpatialPermutation& p, const Box& A) {
    ComponentMap m;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.succ[i] < 0) continue;
        const auto j = static_cast<std::size_t>(p.succ[i]);
        if (!A.contains(p.points[i]) && !A.contains(p.points[j])) m.arrows.emplace_back(i, j);
    }
    return m;
}

inline std::vector<std::int64_t> stitch(const ComponentMap& inside, const ComponentMap& outside, std::size_t n) {
    std::vector<std::int64_t> succ(n, -1);
    for (const auto* m : {&inside, &outside})
        for (const auto& [i, j] : m->arrows) {
            if (succ[i] >= 0) throw IntegrityError("point has two successors");
            succ[i] = static_cast<std::int64_t>(j);
        }
    return succ;
}

struct BoundaryWeights {
    double total = 0.0;    // log-weight of the boundary elements, edge by edge
    double inside = 0.0;   // inside paths
    double outside = 0.0;  // |U ∪ V| boundary points, outside paths and stubs
};

// Log-weights of the elements meeting both A and its complement, and of their inside and outside factors.
inline BoundaryWeights boundary_weights(const SpatialPermutation& p, const Decomposition& d, const ModelParams& params) {
    BoundaryWeights w;
    const double ll = std::log(params.lambda);
    auto edge = [&](std::size_t i) {
        const auto j = static_cast<std::size_t>(p.succ[i]);
        return log_step_density(squared_distance(p.points[i], p.points[j]), p.hidden_steps[i], params);
    };
    std::vector<char> whole(p.elements.size(), 0);
    for (const auto* group : {&d.whole_inside, &d.whole_outside})
        for (const auto& orbit : *group) whole[p.element_of[orbit.front()]] = 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (whole[p.element_of[i]]) continue;
        w.total += ll;
        if (p.succ[i] >= 0) w.total += edge(i);
    }
    auto path_weight = [&](const std::vector<std::size_t>& path, std::size_t interior_lo, std::size_t interior_hi) {
        double s = static_cast<double>(interior_hi - interior_lo) * ll;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) s += edge(path[i]);
        return s;
    };
    for (const auto& path : d.inside_paths) {
        const std::size_t lo = d.inside[path.front()] ? 0 : 1;
        const std::size_t hi = d.inside[path.back()] ? path.size() : path.size() - 1;
        w.inside += path_weight(path, lo, hi);
    }
    std::set<std::size_t> boundary(d.U.begin(), d.U.end());
    boundary.insert(d.V.begin(), d.V.end());
    w.outside = static_cast<double>(boundary.size()) * ll;
    for (const auto& path : d.outside_paths) w.outside += path_weight(path, 1, path.size() > 1 ? path.size() - 1 : 1);
    for (const auto& stub : d.forward_stubs) w.outside += path_weight(stub, 1, stub.size());
    for (const auto& stub : d.backward_stubs) w.outside += path_weight(stub, 0, stub.size() - 1);
    return w;
}

// Random loops and open paths around the unit window, for structural fuzzing.
inline Configuration synthetic_configuration(RngStream& rng, int d) {
    Configuration c;
    c.params.d = d;
    c.params.lambda = rng.uniform(0.1, 1.0);
    c.window = Box::cube(d, 0.0, 1.0);
    c.rho = total_density(c.params).value;
    Point x(static_cast<std::size_t>(d));
    auto draw = [&](double lo, double hi) {
        for (auto& v : x) v = rng.uniform(lo, hi);
    };
    const auto n_loops = rng.poisson(3.0);
    for (std::uint64_t l = 0; l < n_loops; ++l) {
        const auto k = 1 + rng.below(6);
        PointList pts(d);
        const double lo = rng.uniform() < 0.2 ? 0.0 : -0.5;
        const double hi = lo == 0.0 ? 1.0 : 1.5;
        for (std::uint64_t i = 0; i < k; ++i) {
            draw(lo, hi);
            pts.push_back(x);
        }
        c.loops.emplace_back(std::move(pts));
    }
    const auto n_paths = rng.below(3);
    for (std::uint64_t t = 0; t < n_paths; ++t) {
        Trajectory tr;
        tr.points = PointList(d);
        const auto k = 3 + rng.below(10);
        tr.anchor_index = 1 + rng.below(k - 2);
        for (std::uint64_t i = 0; i < k; ++i) {
            if (i == tr.anchor_index)
                draw(0.0, 1.0);
            else if (i == 0 || i + 1 == k)
                draw(2.0, 3.0);
            else
                draw(-0.5, 1.5);
            tr.points.push_back(x);
        }
        for (std::size_t i = 0; i + 1 < k; ++i)
            if (!c.window.contains(tr.points[i]) && !c.window.contains(tr.points[i + 1]) && rng.uniform() < 0.3)
                tr.excursions.emplace_back(i, static_cast<std::int64_t>(2 + rng.below(100)));
        tr.visits = visits_in(tr, c.window);
        c.trajectories.push_back(std::move(tr));
    }
    return c;
}

}  // namespace gperm
