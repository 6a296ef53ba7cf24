#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "analytic.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace gperm {

// Labeled points with a permutation; sigma[i] is the successor of point i.
struct McmcState {
    PointList points;
    std::vector<std::size_t> sigma;

    std::size_t size() const { return points.size(); }
};

inline std::map<std::int64_t, std::int64_t> cycle_lengths(const McmcState& s) {
    std::map<std::int64_t, std::int64_t> m;
    std::vector<char> seen(s.size(), 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (seen[i]) continue;
        std::int64_t len = 0;
        for (std::size_t j = i; !seen[j]; j = s.sigma[j]) {
            seen[j] = 1;
            ++len;
        }
        ++m[len];
    }
    return m;
}

// Mean of a correlated series with the standard error from nonoverlapping batch means.
inline MeanError batch_means(std::span<const double> series, std::size_t batches = 50) {
    if (series.size() < 2 * batches) throw ParameterError("batch means need at least two samples per batch");
    const std::size_t len = series.size() / batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) means.push_back(pairwise_sum(series.subspan(b * len, len)) / static_cast<double>(len));
    MeanError r = mean_and_stderr(means);
    r.n = len * batches;
    return r;
}

struct McmcOptions {
    std::int64_t sweeps = 10000;
    std::int64_t burn_in = 1000;
    std::int64_t thin = 1;
    double displacement = 0.0;  // 0 selects min(side, 1/sqrt(alpha))
};

struct McmcRun {
    std::vector<McmcState> states;
    std::int64_t proposed[4] = {0, 0, 0, 0};
    std::int64_t accepted[4] = {0, 0, 0, 0};
};

namespace detail {

inline double edge_energy(const PointList& pts, std::size_t i, std::size_t j) { return squared_distance(pts[i], pts[j]); }

}  // namespace detail

// Metropolis–Hastings chain for the grand-canonical spatial permutation in A with weight z^n e^{-αH}, z = λ(α/π)^{d/2}.
// Moves (equal rates): insert a fixed point, delete a fixed point, compose σ with a transposition, displace a point.
inline McmcRun mcmc_grand_canonical(RngStream& rng, const Box& A, const ModelParams& params, const McmcOptions& opt = {}) {
    validate_admissible(params);
    if (A.dim() != params.d) throw ParameterError("window dimension does not match model dimension");
    if (opt.sweeps < 1 || opt.burn_in < 0 || opt.thin < 1) throw ParameterError("sweeps >= 1, burn_in >= 0 and thin >= 1 required");
    const double z = params.prefactor() * params.lambda;
    const double za = z * A.volume();
    double min_side = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < A.lower.size(); ++c) min_side = std::min(min_side, A.upper[c] - A.lower[c]);
    const double delta = opt.displacement > 0.0 ? opt.displacement : std::min(min_side, 1.0 / std::sqrt(params.alpha));
    McmcState s;
    s.points = PointList(params.d);
    std::vector<std::size_t> fixed;  // indices of fixed points
    std::vector<std::size_t> pos_in_fixed;
    auto add_fixed = [&](std::size_t i) {
        pos_in_fixed[i] = fixed.size();
        fixed.push_back(i);
    };
    auto drop_fixed = [&](std::size_t i) {
        const std::size_t k = pos_in_fixed[i];
        fixed[k] = fixed.back();
        pos_in_fixed[fixed[k]] = k;
        fixed.pop_back();
        pos_in_fixed[i] = SIZE_MAX;
    };
    std::vector<std::size_t> pred;
    Point x(static_cast<std::size_t>(params.d));
    McmcRun run;
    const std::int64_t total = opt.burn_in + opt.sweeps;
    double burn_points = 0.0;
    std::size_t frozen = 4;
    for (std::int64_t sweep = 0; sweep < total; ++sweep) {
        // after burn-in the sweep length is frozen so that recorded states are not selected by their own size
        if (sweep == opt.burn_in) frozen = 4 * std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(burn_points / std::max<double>(1.0, static_cast<double>(opt.burn_in)))));
        const std::size_t moves = sweep < opt.burn_in ? 4 * std::max<std::size_t>(1, s.size()) : frozen;
        for (std::size_t mv = 0; mv < moves; ++mv) {
            const auto kind = static_cast<int>(rng.below(4));
            ++run.proposed[kind];
            const std::size_t n = s.size();
            if (kind == 0) {
                const double F = static_cast<double>(fixed.size());
                if (rng.uniform() < za / (F + 1.0)) {
                    A.sample_uniform(rng, x);
                    s.points.push_back(x);
                    s.sigma.push_back(n);
                    pred.push_back(n);
                    pos_in_fixed.push_back(SIZE_MAX);
                    add_fixed(n);
                    ++run.accepted[0];
                }
            } else if (kind == 1) {
                if (fixed.empty()) continue;
                const double F = static_cast<double>(fixed.size());
                const std::size_t i = fixed[rng.below(fixed.size())];
                if (!(rng.uniform() < F / za)) continue;
                // move the last point into slot i
                const std::size_t last = n - 1;
                drop_fixed(i);
                if (i != last) {
                    const bool last_fixed = pos_in_fixed[last] != SIZE_MAX;
                    for (int c = 0; c < params.d; ++c) s.points.mut(i)[static_cast<std::size_t>(c)] = s.points[last][static_cast<std::size_t>(c)];
                    if (last_fixed) {
                        drop_fixed(last);
                        s.sigma[i] = i;
                        pred[i] = i;
                        add_fixed(i);
                    } else {
                        const std::size_t nx = s.sigma[last], pv = pred[last];
                        s.sigma[i] = nx;
                        pred[i] = pv;
                        pred[nx] = i;
                        s.sigma[pv] = i;
                    }
                }
                s.points.coords.resize(last * static_cast<std::size_t>(params.d));
                s.sigma.pop_back();
                pred.pop_back();
                pos_in_fixed.pop_back();
                ++run.accepted[1];
            } else if (kind == 2) {
                if (n < 2) continue;
                const std::size_t i = rng.below(n);
                std::size_t j = rng.below(n - 1);
                if (j >= i) ++j;
                const std::size_t si = s.sigma[i], sj = s.sigma[j];
                const double dH = detail::edge_energy(s.points, i, sj) + detail::edge_energy(s.points, j, si) -
                                  detail::edge_energy(s.points, i, si) - detail::edge_energy(s.points, j, sj);
                if (!(rng.uniform() < std::exp(-params.alpha * dH))) continue;
                for (std::size_t k : {i, j})
                    if (pos_in_fixed[k] != SIZE_MAX) drop_fixed(k);
                s.sigma[i] = sj;
                s.sigma[j] = si;
                pred[sj] = i;
                pred[si] = j;
                for (std::size_t k : {i, j})
                    if (s.sigma[k] == k) add_fixed(k);
                ++run.accepted[2];
            } else {
                if (n == 0) continue;
                const std::size_t i = rng.below(n);
                Point y(s.points[i].begin(), s.points[i].end());
                for (auto& v : y) v += rng.uniform(-delta, delta);
                if (!A.contains(y)) continue;
                const std::size_t si = s.sigma[i], pi = pred[i];
                double dH = 0.0;
                if (si != i) {
                    dH += squared_distance(y, s.points[si]) - squared_distance(s.points[i], s.points[si]);
                    dH += squared_distance(s.points[pi], y) - squared_distance(s.points[pi], s.points[i]);
                }
                if (!(rng.uniform() < std::exp(-params.alpha * dH))) continue;
                for (int c = 0; c < params.d; ++c) s.points.mut(i)[static_cast<std::size_t>(c)] = y[static_cast<std::size_t>(c)];
                ++run.accepted[3];
            }
        }
        if (sweep < opt.burn_in) burn_points += static_cast<double>(s.size());
        if (sweep >= opt.burn_in && (sweep - opt.burn_in) % opt.thin == 0) run.states.push_back(s);
    }
    return run;
}

// Regular grid of cells over a box, with the covariance of K at cell centers factorized once.
struct CoxGrid {
    Box box;
    std::vector<int> cells;

    std::size_t size() const {
        std::size_t n = 1;
        for (int c : cells) n *= static_cast<std::size_t>(c);
        return n;
    }
    double cell_volume() const { return box.volume() / static_cast<double>(size()); }

    Point center(std::size_t index) const {
        Point x(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto nc = static_cast<std::size_t>(cells[c]);
            const double h = (box.upper[c] - box.lower[c]) / static_cast<double>(nc);
            x[c] = box.lower[c] + h * (static_cast<double>(index % nc) + 0.5);
            index /= nc;
        }
        return x;
    }

    Box cell(std::size_t index) const {
        Box b = box;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto nc = static_cast<std::size_t>(cells[c]);
            const double h = (box.upper[c] - box.lower[c]) / static_cast<double>(nc);
            const auto k = static_cast<double>(index % nc);
            b.lower[c] = box.lower[c] + h * k;
            b.upper[c] = k + 1 == static_cast<double>(nc) ? box.upper[c] : box.lower[c] + h * (k + 1);
            index /= nc;
        }
        return b;
    }
};

struct CoxRealization {
    std::vector<double> phi;
    std::vector<double> psi;
    std::vector<double> intensity;
    std::vector<std::uint64_t> counts;
    PointList points;
};

class CoxField {
public:
    static constexpr std::size_t kMaxCells = 4096;

    // Centered fields with covariance K_λ, or K_1 plus the constant shift √(2(ρ - ρ_c)) when rho exceeds ρ_c.
    CoxField(CoxGrid grid, const ModelParams& params, double shift = 0.0) : grid_(std::move(grid)), params_(params), shift_(shift) {
        grid_.box.validate();
        if (static_cast<int>(grid_.cells.size()) != params.d) throw ParameterError("grid dimension does not match model dimension");
        for (int c : grid_.cells)
            if (c < 1) throw ParameterError("grid needs at least one cell per axis");
        if (grid_.size() > kMaxCells) throw SizeError("Cox grid restricted to 4096 cells");
        if (shift < 0.0 || !std::isfinite(shift)) throw ParameterError("shift must be finite and nonnegative");
        if (shift > 0.0) params_.lambda = 1.0;
        validate_admissible(params_);
        const auto n = static_cast<Eigen::Index>(grid_.size());
        std::vector<Point> centers;
        for (std::size_t i = 0; i < grid_.size(); ++i) centers.push_back(grid_.center(i));
        Eigen::MatrixXd C(n, n);
        std::map<std::vector<long>, double> cache;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) {
                std::vector<long> key(grid_.cells.size());
                auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
                for (std::size_t c = 0; c < grid_.cells.size(); ++c) {
                    const auto nc = static_cast<std::size_t>(grid_.cells[c]);
                    key[c] = std::labs(static_cast<long>(ii % nc) - static_cast<long>(jj % nc));
                    ii /= nc;
                    jj /= nc;
                }
                auto it = cache.find(key);
                if (it == cache.end())
                    it = cache.emplace(key, k_kernel(centers[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(j)], params_).value).first;
                C(i, j) = it->second;
                C(j, i) = it->second;
            }
        const double maxdiag = C.diagonal().maxCoeff();
        for (double jit : {0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
            Eigen::MatrixXd Cj = C;
            Cj.diagonal().array() += jit * maxdiag;
            llt_.compute(Cj);
            if (llt_.info() == Eigen::Success) {
                jitter_ = jit * maxdiag;
                const Eigen::MatrixXd L = llt_.matrixL();
                residual_ = (L * L.transpose() - C).cwiseAbs().maxCoeff();
                diag_ = C.diagonal();
                return;
            }
        }
        throw NumericError("Cox covariance not factorizable with jitter up to 1e-8 of the largest diagonal entry");
    }

    CoxRealization sample(RngStream& rng) const {
        const auto n = static_cast<Eigen::Index>(grid_.size());
        Eigen::VectorXd g1(n), g2(n);
        for (Eigen::Index i = 0; i < n; ++i) g1(i) = rng.normal();
        for (Eigen::Index i = 0; i < n; ++i) g2(i) = rng.normal();
        const Eigen::VectorXd phi = llt_.matrixL() * g1;
        const Eigen::VectorXd psi = llt_.matrixL() * g2;
        CoxRealization r;
        r.points = PointList(params_.d);
        const double vol = grid_.cell_volume();
        Point x(static_cast<std::size_t>(params_.d));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = phi(i) + shift_;
            const double lam = 0.5 * a * a + 0.5 * psi(i) * psi(i);
            r.phi.push_back(phi(i));
            r.psi.push_back(psi(i));
            r.intensity.push_back(lam);
            const auto k = rng.poisson(lam * vol);
            r.counts.push_back(k);
            const Box cell = grid_.cell(static_cast<std::size_t>(i));
            for (std::uint64_t m = 0; m < k; ++m) {
                cell.sample_uniform(rng, x);
                r.points.push_back(x);
            }
        }
        return r;
    }

    const CoxGrid& grid() const { return grid_; }
    double jitter() const { return jitter_; }
    double residual() const { return residual_; }
    double shift() const { return shift_; }
    double covariance(std::size_t i, std::size_t j) const {
        return k_kernel(grid_.center(i), grid_.center(j), params_).value;
    }
    double variance(std::size_t i) const { return diag_(static_cast<Eigen::Index>(i)); }

private:
    CoxGrid grid_;
    ModelParams params_;
    double shift_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd diag_;
    double jitter_ = 0.0;
    double residual_ = 0.0;
};

inline double supercritical_shift(double rho, const ModelParams& params) {
    const double rc = critical_density(params.alpha, params.d);
    if (!(rho > rc)) throw ParameterError("shift requires rho above the critical density");
    return std::sqrt(2.0 * (rho - rc));
}

inline CoxRealization cox_sample(RngStream& rng, const CoxGrid& grid, const ModelParams& params, double shift = 0.0) {
    return CoxField(grid, params, shift).sample(rng);
}

struct LoopIdentity {
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_err = 0.0;
};

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double prob_in(double lo, double hi, double mean, double sd) { return normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd); }

// Direct quadrature of the k-loop mass hitting [a0, a1], decomposed by the first visit after the root.
inline double loop_mass_hitting(const ModelParams& p, double a0, double a1, int k, int order, double reach, double panel_len) {
    const double lam_k = std::pow(p.lambda, k);
    const double tau = p.step_variance();
    auto step = [&](double x, double y) { return std::exp(-(x - y) * (x - y) / (2.0 * tau)) / std::sqrt(2.0 * std::numbers::pi * tau); };
    const int outer_panels = std::max(1, static_cast<int>(std::ceil(reach / panel_len)));
    const int inner_panels = std::max(1, static_cast<int>(std::ceil((a1 - a0) / panel_len)));
    const auto left = composite_gauss_legendre(order, outer_panels, a0 - reach, a0);
    const auto mid = composite_gauss_legendre(order, inner_panels, a0, a1);
    const auto right = composite_gauss_legendre(order, outer_panels, a1, a1 + reach);
    QuadratureRule outside = left, all = left;
    outside.nodes.insert(outside.nodes.end(), right.nodes.begin(), right.nodes.end());
    outside.weights.insert(outside.weights.end(), right.weights.begin(), right.weights.end());
    all.nodes.insert(all.nodes.end(), mid.nodes.begin(), mid.nodes.end());
    all.weights.insert(all.weights.end(), mid.weights.begin(), mid.weights.end());
    all.nodes.insert(all.nodes.end(), right.nodes.begin(), right.nodes.end());
    all.weights.insert(all.weights.end(), right.weights.begin(), right.weights.end());
    double total = 0.0;
    // j = number of trailing points x_{k-j}, ..., x_{k-1} outside A
    for (int j = 0; j < k; ++j) {
        std::vector<const QuadratureRule*> rules;
        for (int i = 1; i < k; ++i) rules.push_back(i >= k - j ? &outside : &all);
        double s = 0.0;
        for (std::size_t r0 = 0; r0 < mid.nodes.size(); ++r0) {
            const double x0 = mid.nodes[r0];
            if (k == 1) {
                s += mid.weights[r0] / std::sqrt(2.0 * std::numbers::pi * tau);
                continue;
            }
            // chain x0 -> x1 -> ... -> x_{k-1} -> x0 by repeated kernel application
            std::vector<double> v(rules[0]->nodes.size());
            for (std::size_t a = 0; a < v.size(); ++a) v[a] = rules[0]->weights[a] * step(x0, rules[0]->nodes[a]);
            for (std::size_t lvl = 1; lvl < rules.size(); ++lvl) {
                const auto& prev = *rules[lvl - 1];
                const auto& cur = *rules[lvl];
                std::vector<double> nv(cur.nodes.size(), 0.0);
                for (std::size_t b = 0; b < cur.nodes.size(); ++b) {
                    double acc = 0.0;
                    for (std::size_t a = 0; a < prev.nodes.size(); ++a) acc += v[a] * step(prev.nodes[a], cur.nodes[b]);
                    nv[b] = cur.weights[b] * acc;
                }
                v = std::move(nv);
            }
            double close = 0.0;
            for (std::size_t a = 0; a < v.size(); ++a) close += v[a] * step(rules.back()->nodes[a], x0);
            s += mid.weights[r0] * close;
        }
        total += s;
    }
    return lam_k / k * total;
}

// λ^k p_k(x,x) ∫_A E^bridge[1/n_A] dx with the bridge marginals in closed form.
inline double uniform_root_mass(const ModelParams& p, double a0, double a1, int k, int order) {
    const double tau = p.step_variance();
    const auto rule = composite_gauss_legendre(order, 8, a0, a1);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double x = rule.nodes[i];
        double e = 1.0;
        if (k == 2) {
            const double P = prob_in(a0, a1, x, std::sqrt(tau / 2.0));
            e = (1.0 - P) + P / 2.0;
        } else if (k == 3) {
            const double var = tau * 2.0 / 3.0, cov = tau / 3.0;
            const double sd = std::sqrt(var);
            const double P = prob_in(a0, a1, x, sd);
            // P(y1 ∈ A, y2 ∈ A) by conditioning y2 on y1
            const double cond_sd = std::sqrt(var - cov * cov / var);
            const auto inner = composite_gauss_legendre(order, 8, a0, a1);
            double both = 0.0;
            for (std::size_t m = 0; m < inner.nodes.size(); ++m) {
                const double y1 = inner.nodes[m];
                const double dens = std::exp(-(y1 - x) * (y1 - x) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
                both += inner.weights[m] * dens * prob_in(a0, a1, x + cov / var * (y1 - x), cond_sd);
            }
            const double p11 = both, p10 = P - both, p00 = 1.0 - 2.0 * P + both;
            e = p00 + 2.0 * p10 / 2.0 + p11 / 3.0;
        } else if (k != 1) {
            throw ParameterError("uniform-root identity evaluated for k in {1, 2, 3}");
        }
        s += rule.weights[i] * e;
    }
    return std::pow(p.lambda, k) * std::sqrt(p.alpha / (std::numbers::pi * k)) * s;
}

}  // namespace detail

// Mass of k-loops hitting A = [a0, a1] in d = 1, by direct quadrature (lhs) and by the uniform-root representation (rhs).
inline LoopIdentity quadrature_loop_identity(const ModelParams& params, double a0 = 0.0, double a1 = 1.0, int k = 2) {
    validate_admissible(params);
    if (params.d != 1) throw ParameterError("loop identity is evaluated in d = 1");
    if (k < 2 || k > 3) throw ParameterError("loop identity is evaluated for k in {2, 3}");
    if (!(a1 > a0)) throw ParameterError("interval must be nonempty");
    const double sd = std::sqrt(params.step_variance());
    const double reach = 14.0 * sd * std::sqrt(static_cast<double>(k));
    LoopIdentity r;
    r.lhs = detail::loop_mass_hitting(params, a0, a1, k, 16, reach, sd);
    const double check = detail::loop_mass_hitting(params, a0, a1, k, 12, reach, sd);
    if (!(std::abs(check - r.lhs) <= 1e-9 * std::abs(r.lhs)))
        throw NumericError("loop identity quadrature not converged: orders 12 and 16 differ by " + std::to_string(std::abs(check - r.lhs)));
    r.rhs = detail::uniform_root_mass(params, a0, a1, k, 16);
    r.rel_err = std::abs(r.lhs - r.rhs) / std::abs(r.rhs);
    return r;
}

}  // namespace gperm
