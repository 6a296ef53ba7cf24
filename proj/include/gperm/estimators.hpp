#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "analytic.hpp"
#include "combinatorics.hpp"
#include "configuration.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "interlacements.hpp"
#include "loopsoup.hpp"
#include "numerics.hpp"

namespace gperm {

struct EstimateReport {
    std::string name;
    double estimate = 0.0;
    double stderr_ = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    double z = 0.0;
    std::size_t replicas = 0;
    double runtime_s = 0.0;

    bool flagged() const { return !(std::abs(z) <= 3.0); }
};

inline double z_score(double estimate, double stderr_, double target, double tolerance) {
    const double s = std::hypot(stderr_, tolerance);
    if (s == 0.0) return estimate == target ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), estimate - target);
    return (estimate - target) / s;
}

inline EstimateReport make_report(std::string name, const MeanError& m, double target, double tolerance, double runtime_s = 0.0) {
    EstimateReport r;
    r.name = std::move(name);
    r.estimate = m.mean;
    r.stderr_ = m.stderr_;
    r.target = target;
    r.tolerance = tolerance;
    r.replicas = m.n;
    r.runtime_s = runtime_s;
    r.z = z_score(r.estimate, r.stderr_, target, tolerance);
    return r;
}

// One point list per replica.
using PointEnsemble = std::vector<PointList>;

inline PointList configuration_points(const Configuration& c) {
    PointList out(c.params.d);
    for (const auto& l : c.loops) out.append(l.points);
    for (const auto& t : c.trajectories) out.append(t.points);
    return out;
}

inline PointEnsemble ensemble_points(const std::vector<Configuration>& cs) {
    PointEnsemble e;
    for (const auto& c : cs) e.push_back(configuration_points(c));
    return e;
}

inline PointList sample_points(const LoopSoupSample& s) {
    PointList out(s.window.dim());
    for (const auto& l : s.loops) out.append(l.points);
    return out;
}

inline PointList sample_points(const InterlacementSample& s) {
    PointList out(s.window.dim());
    for (const auto& t : s.trajectories) out.append(t.points);
    return out;
}

namespace detail {

inline void require_replicas(const PointEnsemble& ens) {
    if (ens.empty()) throw InsufficientDataError("empty ensemble");
}

inline double count_in(const PointList& pts, const Box& B) {
    double n = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) n += B.contains(pts[i]) ? 1.0 : 0.0;
    return n;
}

}  // namespace detail

inline EstimateReport density_estimate(const PointEnsemble& ens, const Box& W, double target, double tolerance,
                                       const std::string& name = "density") {
    detail::require_replicas(ens);
    std::vector<double> v;
    v.reserve(ens.size());
    for (const auto& pts : ens) v.push_back(detail::count_in(pts, W) / W.volume());
    return make_report(name, mean_and_stderr(v), target, tolerance);
}

// Translations t with B_m + t inside W for every m.
inline Box translation_range(const std::vector<Box>& boxes, const Box& W) {
    const int d = W.dim();
    Box T;
    T.lower.assign(static_cast<std::size_t>(d), -std::numeric_limits<double>::infinity());
    T.upper.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::infinity());
    for (const auto& b : boxes)
        for (std::size_t c = 0; c < static_cast<std::size_t>(d); ++c) {
            T.lower[c] = std::max(T.lower[c], W.lower[c] - b.lower[c]);
            T.upper[c] = std::min(T.upper[c], W.upper[c] - b.upper[c]);
        }
    for (std::size_t c = 0; c < static_cast<std::size_t>(d); ++c)
        if (!(T.upper[c] > T.lower[c])) throw ParameterError("boxes do not fit in the window with room to translate");
    return T;
}

namespace detail {

inline void check_boxes(const std::vector<Box>& boxes) {
    if (boxes.empty() || boxes.size() > 4) throw ParameterError("correlation estimate needs 1 to 4 boxes");
    for (const auto& b : boxes) b.validate();
    for (std::size_t i = 0; i < boxes.size(); ++i)
        for (std::size_t j = i + 1; j < boxes.size(); ++j)
            if (boxes[i].overlaps(boxes[j])) throw ParameterError("correlation boxes must be pairwise disjoint");
}

// Σ over tuples of points of the volume of translations t ∈ T with p_m - t ∈ B_m, divided by |T|.
inline double translation_averaged_product(const PointList& pts, const std::vector<Box>& boxes, const Box& T) {
    const auto n = boxes.size();
    const auto d = static_cast<std::size_t>(pts.dim);
    // candidates for each slot: points that lie in B_m + T
    std::vector<std::vector<std::size_t>> cand(n);
    for (std::size_t m = 0; m < n; ++m) {
        Box reach = boxes[m];
        for (std::size_t c = 0; c < d; ++c) {
            reach.lower[c] += T.lower[c];
            reach.upper[c] += T.upper[c];
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            bool in = true;
            for (std::size_t c = 0; c < d && in; ++c) in = pts[i][c] >= reach.lower[c] && pts[i][c] <= reach.upper[c];
            if (in) cand[m].push_back(i);
        }
    }
    double total = 0.0;
    std::function<void(std::size_t, const std::vector<double>&, const std::vector<double>&)> rec =
        [&](std::size_t m, const std::vector<double>& l, const std::vector<double>& h) {
            if (m == n) {
                double vol = 1.0;
                for (std::size_t c = 0; c < d; ++c) vol *= h[c] - l[c];
                total += vol;
                return;
            }
            for (std::size_t i : cand[m]) {
                std::vector<double> l2 = l, h2 = h;
                bool ok = true;
                for (std::size_t c = 0; c < d && ok; ++c) {
                    l2[c] = std::max(l2[c], pts[i][c] - boxes[m].upper[c]);
                    h2[c] = std::min(h2[c], pts[i][c] - boxes[m].lower[c]);
                    ok = h2[c] > l2[c];
                }
                if (ok) rec(m + 1, l2, h2);
            }
        };
    rec(0, T.lower, T.upper);
    return total / T.volume();
}

}  // namespace detail

// E[N(B_1)···N(B_n)] / Π|B_m|, from the boxes as given or averaged over all translations that keep them in W.
inline EstimateReport correlation_estimate(const PointEnsemble& ens, const std::vector<Box>& boxes, double target, double tolerance,
                                           const Box* translate_within = nullptr, const std::string& name = "correlation") {
    detail::require_replicas(ens);
    detail::check_boxes(boxes);
    double vol = 1.0;
    for (const auto& b : boxes) vol *= b.volume();
    std::vector<double> v;
    v.reserve(ens.size());
    if (translate_within != nullptr) {
        const Box T = translation_range(boxes, *translate_within);
        for (const auto& pts : ens) v.push_back(detail::translation_averaged_product(pts, boxes, T) / vol);
    } else {
        for (const auto& pts : ens) {
            double prod = 1.0;
            for (const auto& b : boxes) prod *= detail::count_in(pts, b);
            v.push_back(prod / vol);
        }
    }
    return make_report(name, mean_and_stderr(v), target, tolerance);
}

// Chebyshev interpolant of r² ↦ K_λ on [0, s_max]; error_bound is the largest deviation from the series at interleaved check points.
class KernelTable {
public:
    KernelTable(const ModelParams& params, double s_max, int nodes = 96) : params_(params), s_max_(s_max), coef_(static_cast<std::size_t>(nodes)) {
        validate_admissible(params);
        if (!(s_max > 0.0)) throw ParameterError("table range must be positive");
        const int n = nodes;
        std::vector<double> f(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            const double x = std::cos(std::numbers::pi * (j + 0.5) / n);
            const auto kv = k_kernel_r2(to_s(x), params);
            f[static_cast<std::size_t>(j)] = kv.value;
            series_bound_ = std::max(series_bound_, kv.tail_bound);
        }
        for (int k = 0; k < n; ++k) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += f[static_cast<std::size_t>(j)] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
            coef_[static_cast<std::size_t>(k)] = (k == 0 ? 1.0 : 2.0) * s / n;
        }
        for (int j = 0; j <= 2 * n; ++j) {
            const double s = s_max * j / (2.0 * n);
            const auto kv = k_kernel_r2(s, params);
            error_bound_ = std::max(error_bound_, std::abs((*this)(s) - kv.value));
            series_bound_ = std::max(series_bound_, kv.tail_bound);
        }
        error_bound_ += series_bound_;
    }

    double operator()(double r2) const {
        if (r2 < 0.0 || r2 > s_max_ * (1.0 + 1e-12)) throw ParameterError("kernel table queried outside its range");
        const double x = 2.0 * r2 / s_max_ - 1.0;
        double b1 = 0.0, b2 = 0.0;
        for (std::size_t k = coef_.size(); k-- > 1;) {
            const double b0 = 2.0 * x * b1 - b2 + coef_[k];
            b2 = b1;
            b1 = b0;
        }
        return x * b1 - b2 + coef_[0];
    }

    double error_bound() const { return error_bound_; }
    double s_max() const { return s_max_; }
    const ModelParams& params() const { return params_; }

private:
    double to_s(double x) const { return 0.5 * (x + 1.0) * s_max_; }

    ModelParams params_;
    double s_max_;
    std::vector<double> coef_;
    double error_bound_ = 0.0;
    double series_bound_ = 0.0;
};

inline double max_squared_distance(const Box& a, const Box& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.lower.size(); ++c) {
        const double e = std::max(a.upper[c] - b.lower[c], b.upper[c] - a.lower[c]);
        s += e * e;
    }
    return s;
}

struct QuadratureValue {
    double value = 0.0;
    double error = 0.0;
};

namespace detail {

// Nodes and weights for the density of y_c - x_c with x uniform on [a0, a1] and y uniform on [b0, b1].
inline QuadratureRule difference_rule(double a0, double a1, double b0, double b1, int order) {
    const double ha = a1 - a0, hb = b1 - b0;
    std::vector<double> br{b0 - a1, b0 - a0, b1 - a1, b1 - a0};
    std::sort(br.begin(), br.end());
    auto density = [&](double u) { return std::max(0.0, std::min(a1 + u, b1) - std::max(a0 + u, b0)) / (ha * hb); };
    QuadratureRule out;
    for (std::size_t p = 0; p + 1 < br.size(); ++p) {
        if (!(br[p + 1] > br[p])) continue;
        const auto g = gauss_legendre(order, br[p], br[p + 1]);
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            out.nodes.push_back(g.nodes[i]);
            out.weights.push_back(g.weights[i] * density(g.nodes[i]));
        }
    }
    return out;
}

inline double pair_average(const std::function<double(double)>& f, const Box& B1, const Box& B2, int order) {
    const std::size_t d = B1.lower.size();
    std::vector<QuadratureRule> rules;
    for (std::size_t c = 0; c < d; ++c) rules.push_back(difference_rule(B1.lower[c], B1.upper[c], B2.lower[c], B2.upper[c], order));
    std::vector<std::size_t> idx(d, 0);
    double total = 0.0;
    while (true) {
        double r2 = 0.0, w = 1.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double u = rules[c].nodes[idx[c]];
            r2 += u * u;
            w *= rules[c].weights[idx[c]];
        }
        total += w * f(r2);
        std::size_t c = 0;
        while (c < d && ++idx[c] == rules[c].nodes.size()) idx[c++] = 0;
        if (c == d) break;
    }
    return total;
}

}  // namespace detail

// Average of f(‖x - y‖²) over x ∈ B1, y ∈ B2, with a grid-doubling error estimate.
inline QuadratureValue box_average_pair(const std::function<double(double)>& f, const Box& B1, const Box& B2, int order = 6) {
    const double coarse = detail::pair_average(f, B1, B2, order);
    const double fine = detail::pair_average(f, B1, B2, 2 * order);
    return {fine, std::abs(fine - coarse)};
}

// Box-averaged two-point targets: ρ² + ⟨K_λ²⟩ for loops, β² + 2β⟨K_1⟩ for interlacements.
inline QuadratureValue loop_pair_target(const Box& B1, const Box& B2, const ModelParams& params, int order = 6) {
    const KernelTable K(params, max_squared_distance(B1, B2));
    const auto rho = total_density(params);
    const auto avg = box_average_pair([&](double s) { return K(s) * K(s); }, B1, B2, order);
    const double kmax = K(0.0);
    return {rho.value * rho.value + avg.value, avg.error + 2.0 * rho.value * rho.tail_bound + 2.0 * kmax * K.error_bound()};
}

inline QuadratureValue interlacement_pair_target(const Box& B1, const Box& B2, double beta, const ModelParams& params, int order = 6) {
    ModelParams p1 = params;
    p1.lambda = 1.0;
    const KernelTable K(p1, max_squared_distance(B1, B2));
    const auto avg = box_average_pair([&](double s) { return K(s); }, B1, B2, order);
    return {beta * beta + 2.0 * beta * avg.value, 2.0 * beta * (avg.error + K.error_bound())};
}

inline EstimateReport laplace_mc(const PointEnsemble& ens, const Box& B, double c, double target, double tolerance,
                                 const std::string& name = "laplace") {
    detail::require_replicas(ens);
    if (c < 0.0) throw ParameterError("step height must be nonnegative");
    std::vector<double> v;
    v.reserve(ens.size());
    for (const auto& pts : ens) v.push_back(std::exp(-c * detail::count_in(pts, B)));
    return make_report(name, mean_and_stderr(v), target, tolerance);
}

struct LaplaceSeries {
    double value = 1.0;
    double exponent = 0.0;
    double truncation_bound = 0.0;  // on the value
    double quadrature_error = 0.0;  // on the value
    double validity = 0.0;          // K(0,0)·|e^{-c} - 1|·|B|
};

namespace detail {

inline Eigen::MatrixXd nystrom_matrix(const PointList& nodes, const std::vector<double>& weights, const std::function<double(double)>& kernel) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            const double v = std::sqrt(weights[ui] * weights[uj]) * kernel(squared_distance(nodes[ui], nodes[uj]));
            M(i, j) = v;
            M(j, i) = v;
        }
    return M;
}

inline void tensor_rule(const Box& B, int order, int panels, PointList& nodes, std::vector<double>& weights) {
    const auto d = static_cast<std::size_t>(B.dim());
    std::vector<QuadratureRule> rules;
    for (std::size_t c = 0; c < d; ++c) rules.push_back(composite_gauss_legendre(order, panels, B.lower[c], B.upper[c]));
    nodes = PointList(B.dim());
    weights.clear();
    std::vector<std::size_t> idx(d, 0);
    Point x(d);
    while (true) {
        double w = 1.0;
        for (std::size_t c = 0; c < d; ++c) {
            x[c] = rules[c].nodes[idx[c]];
            w *= rules[c].weights[idx[c]];
        }
        nodes.push_back(x);
        weights.push_back(w);
        std::size_t c = 0;
        while (c < d && ++idx[c] == rules[c].nodes.size()) idx[c++] = 0;
        if (c == d) break;
    }
}

inline double check_validity(double k00, double t, double volume) {
    const double q = k00 * std::abs(t) * volume;
    if (!(q < 1.0)) throw DomainError("Laplace series requires K(0,0)·|e^{-c}-1|·|B| < 1");
    return q;
}

// tr(M^j) for j = 1..jmax from the spectrum of the symmetric Nyström matrix.
inline std::vector<double> trace_powers(const Eigen::MatrixXd& M, int jmax) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    std::vector<double> tr(static_cast<std::size_t>(jmax), 0.0);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double mu = es.eigenvalues()(i);
        double p = 1.0;
        for (int j = 1; j <= jmax; ++j) {
            p *= mu;
            tr[static_cast<std::size_t>(j - 1)] += p;
        }
    }
    return tr;
}

inline double loop_exponent(const Box& B, double t, const ModelParams& params, int jmax, int order, int panels) {
    PointList nodes;
    std::vector<double> w;
    tensor_rule(B, order, panels, nodes, w);
    const auto M = nystrom_matrix(nodes, w, [&](double s) { return k_kernel_r2(s, params).value; });
    const auto tr = trace_powers(M, jmax);
    double e = 0.0, tp = 1.0;
    for (int j = 1; j <= jmax; ++j) {
        tp *= t;
        e += tp * tr[static_cast<std::size_t>(j - 1)] / j;
    }
    return e;
}

inline double chain_exponent(const Box& B, double t, double beta, const KernelTable& K, int nmax, int order, int panels) {
    PointList nodes;
    std::vector<double> w;
    tensor_rule(B, order, panels, nodes, w);
    const auto M = nystrom_matrix(nodes, w, [&](double s) { return K(s); });
    Eigen::VectorXd s(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) s(static_cast<Eigen::Index>(i)) = std::sqrt(w[i]);
    Eigen::VectorXd v = s;
    double e = 0.0, tp = 1.0;
    for (int n = 1; n <= nmax; ++n) {
        tp *= t;
        e += tp * s.dot(v);
        v = M * v;
    }
    return beta * e;
}

}  // namespace detail

// exp Σ_{j≤jmax} (t^j/j) tr((K 1_B)^j), t = e^{-c} - 1, for a one-dimensional step at height c on B.
inline LaplaceSeries laplace_series_loops(const Box& B, double c, const ModelParams& params, int jmax = 60, int order = 12, int panels = 2) {
    validate_admissible(params);
    if (params.d != 1) throw ParameterError("loop Laplace series is evaluated by quadrature in d = 1 only");
    if (c < 0.0) throw ParameterError("step height must be nonnegative");
    LaplaceSeries r;
    const double t = std::expm1(-c);
    const auto k00 = total_density(params);
    r.validity = detail::check_validity(k00.value, t, B.volume());
    if (t == 0.0) return r;
    r.exponent = detail::loop_exponent(B, t, params, jmax, order, 2 * panels);
    const double coarse = detail::loop_exponent(B, t, params, jmax, order, panels);
    r.value = std::exp(r.exponent);
    const double q = r.validity;
    const double tail = std::pow(q, jmax + 1) / ((jmax + 1) * (1.0 - q));
    r.truncation_bound = r.value * std::expm1(tail);
    r.quadrature_error = r.value * std::expm1(std::abs(r.exponent - coarse)) + r.value * k00.tail_bound * std::abs(t) * B.volume() / (1.0 - q);
    return r;
}

// Same functional from the permutation expansion truncated at n_max, summed over set partitions.
inline LaplaceSeries laplace_series_loops_partitions(const Box& B, double c, const ModelParams& params, int n_max = 3, int order = 12,
                                                     int panels = 2) {
    validate_admissible(params);
    if (params.d != 1) throw ParameterError("loop Laplace series is evaluated by quadrature in d = 1 only");
    LaplaceSeries r;
    const double t = std::expm1(-c);
    r.validity = detail::check_validity(total_density(params).value, t, B.volume());
    if (t == 0.0) return r;
    auto value_at = [&](int p) {
        PointList nodes;
        std::vector<double> w;
        detail::tensor_rule(B, order, p, nodes, w);
        const auto M = detail::nystrom_matrix(nodes, w, [&](double s) { return k_kernel_r2(s, params).value; });
        const auto tr = detail::trace_powers(M, n_max);
        std::vector<double> a(static_cast<std::size_t>(n_max));
        double fact = 1.0, tp = 1.0;
        for (int m = 1; m <= n_max; ++m) {
            tp *= t;
            a[static_cast<std::size_t>(m - 1)] = fact * tp * tr[static_cast<std::size_t>(m - 1)];
            fact *= m;
        }
        return exp_formula_sides(a, n_max).rhs;
    };
    r.value = value_at(2 * panels);
    r.quadrature_error = std::abs(r.value - value_at(panels));
    const double q = r.validity;
    r.truncation_bound = std::pow(q, n_max + 1) / (1.0 - q);
    r.exponent = std::log(r.value);
    return r;
}

// exp β Σ_{n≤n_max} t^n ∫_{B^n} Π K_1(x_k, x_{k+1}) for a step at height c on B.
inline LaplaceSeries laplace_series_ri(const Box& B, double c, double beta, const ModelParams& params, int n_max = 40, int order = 6) {
    if (params.d < 3) throw TransienceError("interlacement Laplace series requires d >= 3");
    if (!(beta > 0.0)) throw ParameterError("interlacement level must be positive");
    if (c < 0.0) throw ParameterError("step height must be nonnegative");
    ModelParams p1 = params;
    p1.lambda = 1.0;
    LaplaceSeries r;
    const double t = std::expm1(-c);
    const auto k00 = total_density(p1);
    r.validity = detail::check_validity(k00.value, t, B.volume());
    if (t == 0.0) return r;
    const KernelTable K(p1, max_squared_distance(B, B));
    r.exponent = detail::chain_exponent(B, t, beta, K, n_max, order + 2, 1);
    const double coarse = detail::chain_exponent(B, t, beta, K, n_max, order, 1);
    r.value = std::exp(r.exponent);
    const double q = r.validity;
    const double tail = beta * std::abs(t) * B.volume() * std::pow(q, n_max) / (1.0 - q);
    r.truncation_bound = r.value * std::expm1(tail);
    const double table = beta * std::abs(t) * B.volume() * K.error_bound() * std::abs(t) * B.volume() / ((1.0 - q) * (1.0 - q));
    r.quadrature_error = r.value * std::expm1(std::abs(r.exponent - coarse) + table);
    return r;
}

inline nlohmann::json report_to_json(const EstimateReport& r) {
    return {{"name", r.name}, {"estimate", r.estimate}, {"stderr", r.stderr_}, {"target", r.target}, {"tolerance", r.tolerance},
            {"z", std::isfinite(r.z) ? nlohmann::json(r.z) : nlohmann::json(r.z > 0 ? "inf" : "-inf")},
            {"replicas", r.replicas}, {"flagged", r.flagged()}};
}

// Aggregated reports; runtimes are left out so that documents depend only on inputs.
inline nlohmann::json compare_report(const std::vector<EstimateReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    std::size_t flagged = 0;
    for (const auto& r : reports) {
        arr.push_back(report_to_json(r));
        flagged += r.flagged() ? 1 : 0;
    }
    return {{"reports", arr}, {"flagged", flagged}};
}

inline std::string compare_report_csv(const std::vector<EstimateReport>& reports) {
    std::string out = "name,estimate,stderr,target,tolerance,z,replicas,flagged\n";
    char buf[512];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%d\n", r.name.c_str(), r.estimate, r.stderr_, r.target, r.tolerance, r.z,
                      r.replicas, r.flagged() ? 1 : 0);
        out += buf;
    }
    return out;
}

}  // namespace gperm
